//! Numerical laboratory for Hermitian Wigner matrices.
//!
//! The crate is organised bottom-up:
//!
//! - [`ensembles`]: entry laws, seeding and sampling of Wigner/GUE matrices,
//!   plus the regularity integrals of the entry density.
//! - [`eigensolver`]: dense Hermitian eigendecomposition (Householder
//!   tridiagonalisation followed by implicit QL) and minor extraction.
//! - [`spectral`]: closed-form semicircle quantities and per-spectrum
//!   statistics (counting, Stieltjes transform, unfolded spacings).
//! - [`diagnostics`]: overlaps with minor eigenvectors, the Schur complement
//!   resolvent identity, the `c`/`d` coefficients, the good event and the
//!   index selection used to control them.
//! - [`harness`]: declarative Monte Carlo experiments with deterministic,
//!   thread-count independent aggregation.
//! - [`output`]: CSV and JSON emission of experiment results.
//! - [`selfcheck`]: the built-in verification suite.

// Negated comparisons such as `!(x > 0.0)` deliberately reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod diagnostics;
pub mod eigensolver;
pub mod ensembles;
mod error;
pub mod harness;
mod matrix;
pub mod output;
pub mod quadrature;
pub mod selfcheck;
pub mod spectral;
pub mod summation;

pub use error::{Error, Result};
pub use matrix::HermitianMatrix;
pub use num_complex::Complex64;
