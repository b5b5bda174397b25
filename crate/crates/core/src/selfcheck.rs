//! Built-in verification suite.
//!
//! Each check measures a residual against an analytic identity and compares
//! it with a fixed tolerance. Randomised checks use fixed seeds.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::Serialize;

use crate::diagnostics::{check_chains, coefficients, good_event, overlaps, schur_resolvent_residual, select_indices};
use crate::eigensolver::{eigh, eigvalsh};
use crate::ensembles::{derive_seed, regularity_integrals, sample_gue, DistributionSpec, EntryRole, SeedSpec};
use crate::quadrature::{integrate, QuadratureOptions};
use crate::spectral::{gue_normalization, gue_normalization_closed_form, m_sc, rho_sc, sine_kernel_det, ComplexPoint};
use crate::{HermitianMatrix, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckOutcome {
    pub name: String,
    pub residual: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl CheckOutcome {
    fn new(name: &str, residual: f64, tolerance: f64) -> Self {
        Self { name: name.to_string(), residual, tolerance, passed: residual <= tolerance }
    }

    fn failed(name: &str, err: crate::Error) -> Self {
        Self { name: format!("{name} ({err})"), residual: f64::NAN, tolerance: f64::NAN, passed: false }
    }
}

const SEED: u64 = 0x5EED_C4EC;

fn matrix(n: usize, k: u64) -> Result<HermitianMatrix> {
    sample_gue(n, SeedSpec::new(derive_seed(SEED, n as u64), k))
}

fn run(name: &str, tolerance: f64, f: impl FnOnce() -> Result<f64>) -> CheckOutcome {
    match f() {
        Ok(r) => CheckOutcome::new(name, r, tolerance),
        Err(e) => CheckOutcome::failed(name, e),
    }
}

/// Runs every check; never stops at the first failure.
pub fn run_all() -> Vec<CheckOutcome> {
    let quad = QuadratureOptions { abs_tol: 1e-14, rel_tol: 1e-13, max_intervals: 4000 };
    let mut out = Vec::new();

    out.push(run("semicircle identity pi*rho_sc(E) = Im m_sc(E + 1e-9 i), |E| <= 1.9", 1e-6, || {
        let mut worst = 0.0f64;
        for i in 0..=380 {
            let e = -1.9 + 0.01 * i as f64;
            worst = worst.max((PI * rho_sc(e) - m_sc(ComplexPoint::new(e, 1e-9))?.im).abs());
        }
        Ok(worst)
    }));
    out.push(run("semicircle mass: |int rho_sc - 1|", 1e-8, || {
        Ok((integrate(rho_sc, -2.0, 2.0, quad)?.value - 1.0).abs())
    }));
    out.push(run("uncorrected prefactor (1/2pi) sqrt(1 - E^2/4) has mass 1/2: |mass - 1/2|", 1e-8, || {
        let printed = |e: f64| (1.0 - e * e / 4.0).max(0.0).sqrt() / (2.0 * PI);
        Ok((integrate(printed, -2.0, 2.0, quad)?.value - 0.5).abs())
    }));
    out.push(run("m_sc quadratic residual |m^2 + z m + 1|", 1e-12, || {
        let mut worst = 0.0f64;
        for i in 0..100 {
            let z = ComplexPoint::new(-4.0 + 0.08 * i as f64, 10f64.powf(-6.0 + 0.08 * i as f64));
            let m = m_sc(z)?;
            let zc = z.to_complex();
            worst = worst.max((m * m + zc * m + 1.0).norm());
        }
        Ok(worst)
    }));
    out.push(run("eigensolver reconstruction ||H - U L U*||_F / ||H||_F", 1e-9, || {
        let mut worst = 0.0f64;
        for (k, n) in [2usize, 7, 33, 96].into_iter().enumerate() {
            let h = matrix(n, k as u64)?;
            let s = eigh(&h)?;
            let mut err = 0.0;
            for r in 0..n {
                for c in 0..n {
                    let mut v = Complex64::new(0.0, 0.0);
                    for a in 0..n {
                        let u = s.eigenvector(a).expect("eigenvectors");
                        v += u[r] * s.eigenvalues()[a] * u[c].conj();
                    }
                    err += (h.get(r, c) - v).norm_sqr();
                }
            }
            worst = worst.max(err.sqrt() / h.frobenius_norm());
        }
        Ok(worst)
    }));
    out.push(run("eigensolver orthogonality max |<u_i, u_j> - delta_ij|", 1e-10, || {
        let mut worst = 0.0f64;
        for (k, n) in [5usize, 40, 96].into_iter().enumerate() {
            let s = eigh(&matrix(n, 10 + k as u64)?)?;
            for i in 0..n {
                for j in 0..n {
                    let (ui, uj) = (s.eigenvector(i).unwrap(), s.eigenvector(j).unwrap());
                    let dot: Complex64 = ui.iter().zip(uj).map(|(a, b)| a.conj() * b).sum();
                    let target = if i == j { 1.0 } else { 0.0 };
                    worst = worst.max((dot - target).norm());
                }
            }
        }
        Ok(worst)
    }));
    out.push(run("Cauchy interlacing violation of minor eigenvalues", 1e-10, || {
        let mut worst = 0.0f64;
        for (k, n) in [3usize, 16, 64].into_iter().enumerate() {
            let h = matrix(n, 20 + k as u64)?;
            let mu = eigvalsh(&h)?.into_eigenvalues();
            for j in [0, n / 2, n - 1] {
                let lambda = eigvalsh(&h.minor(j)?)?.into_eigenvalues();
                for (a, &l) in lambda.iter().enumerate() {
                    worst = worst.max(mu[a] - l).max(l - mu[a + 1]);
                }
            }
        }
        Ok(worst)
    }));
    out.push(run("Parseval: |sum xi - N ||a||^2| / (N ||a||^2)", 1e-10, || {
        let mut worst = 0.0f64;
        for k in 0..10u64 {
            let n = 4 + 6 * k as usize;
            let h = matrix(n, 30 + k)?;
            let j = k as usize % n;
            let total: f64 = overlaps(&h, j)?.xi.iter().sum();
            let norm2: f64 = h.row_without_diagonal(j).iter().map(|v| v.norm_sqr()).sum();
            worst = worst.max((total - n as f64 * norm2).abs() / (n as f64 * norm2));
        }
        Ok(worst)
    }));
    out.push(run("Schur complement resolvent residual", 1e-9, || {
        let mut worst = 0.0f64;
        for k in 0..20u64 {
            let n = 2 + 3 * k as usize;
            let h = matrix(n, 40 + k)?;
            let z = ComplexPoint::new(-1.0 + 0.1 * k as f64, 10f64.powf(-3.0 + 0.15 * k as f64));
            worst = worst.max(schur_resolvent_residual(&h, (k as usize * 5) % n, z)?);
        }
        Ok(worst)
    }));
    out.push(run("coefficient chains on good events (largest relative violation)", 1e-14, || {
        let mut worst = 0.0f64;
        let mut checked = 0;
        for k in 0..40u64 {
            let n = 32;
            let h = matrix(n, 60 + k)?;
            let lambda = eigvalsh(&h.minor(0)?)?.into_eigenvalues();
            let (e, eps) = (-1.0 + 0.05 * k as f64, 0.05 + 0.02 * k as f64);
            if !good_event(&lambda, e, eps, n) {
                continue;
            }
            let sel = select_indices(&lambda, e, eps, n)?;
            let check = check_chains(&coefficients(&lambda, e, eps, n)?, &sel, eps);
            worst = worst.max(check.max_violation);
            checked += 1;
        }
        Ok(if checked == 0 { f64::INFINITY } else { worst })
    }));
    out.push(run("coefficient derivatives vs central differences (relative)", 1e-4, || {
        let lambda: Vec<f64> = (0..41).map(|k| -1.0 + 0.05 * k as f64 + 0.001).collect();
        let (n, eps, h) = (64, 0.7, 1e-7);
        let mut worst = 0.0f64;
        for e in [-0.3, 0.0, 0.42] {
            let c = coefficients(&lambda, e, eps, n)?;
            let p = coefficients(&lambda, e + h, eps, n)?;
            let m = coefficients(&lambda, e - h, eps, n)?;
            for a in 0..lambda.len() {
                let x = n as f64 * (lambda[a] - e);
                let scale = n as f64 / (x * x + eps * eps);
                let fc = (p.c[a] - m.c[a]) / (2.0 * h);
                let fd = (p.d[a] - m.d[a]) / (2.0 * h);
                worst = worst
                    .max((fc - c.c_prime[a]).abs() / c.c_prime[a].abs().max(scale))
                    .max((fd - c.d_prime[a]).abs() / c.d_prime[a].abs().max(scale));
            }
        }
        Ok(worst)
    }));
    let gaussian = DistributionSpec::gaussian(EntryRole::OffDiagonal);
    for (name, target, pick) in [
        ("regularity I6 = 120 (Gaussian, variance 1/2), relative", 120.0, 0usize),
        ("regularity I4 = 12 (Gaussian, variance 1/2), relative", 12.0, 1),
        ("regularity I2pp = 8 (Gaussian, variance 1/2), relative", 8.0, 2),
    ] {
        out.push(run(name, 1e-4, || {
            let r = regularity_integrals(&gaussian)?;
            let v = [r.i6, r.i4, r.i2pp][pick];
            Ok((v / target - 1.0).abs())
        }));
    }
    out.push(run("sine-kernel determinant at (0, 0.5) vs 1 - 4/pi^2", 1e-14, || {
        Ok((sine_kernel_det(&[0.0, 0.5])? - (1.0 - 4.0 / (PI * PI))).abs())
    }));
    out.push(run("GUE normalisation N = 2 by quadrature vs closed form (relative)", 1e-9, || {
        Ok((gue_normalization(2)? / gue_normalization_closed_form(2) - 1.0).abs())
    }));
    out
}
