//! Minor/overlap diagnostics.
//!
//! For a matrix `H` of dimension `N` and a removed index `j`, let `B` be the
//! minor without row and column `j`, with eigenpairs `(lambda_a, u_a)`, and
//! let `a` be column `j` of `H` without its diagonal entry. The overlaps are
//! `xi_a = N |u_a* a|^2`, and the Schur complement formula reads
//! `(H - z)^{-1}(j, j) = 1 / (h_jj - z - (1/N) sum_a xi_a / (lambda_a - z))`.
//!
//! Indices are 0-based throughout.

use num_complex::Complex64;
use serde::Serialize;

use crate::eigensolver::{eigh, Spectrum};
use crate::spectral::ComplexPoint;
use crate::summation::NeumaierSum;
use crate::{Error, HermitianMatrix, Result};

/// Number of eigenvalues the good event requires outside the `eps/N` window.
pub const GOOD_EVENT_COUNT: usize = 8;

/// Minor eigenvalues and the overlaps of the removed column with their eigenvectors.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Overlaps {
    pub lambda: Vec<f64>,
    pub xi: Vec<f64>,
}

/// Column `j` of `h` without its diagonal entry.
pub fn removed_column(h: &HermitianMatrix, j: usize) -> Vec<Complex64> {
    h.row_without_diagonal(j).into_iter().map(|v| v.conj()).collect()
}

pub fn overlaps(h: &HermitianMatrix, j: usize) -> Result<Overlaps> {
    let minor = h.minor(j)?;
    let spectrum = eigh(&minor)?;
    Ok(overlaps_with(&spectrum, &removed_column(h, j), h.n()))
}

/// Overlaps of `a` with the eigenvectors of an already decomposed minor.
pub fn overlaps_with(minor: &Spectrum, a: &[Complex64], n: usize) -> Overlaps {
    let nf = n as f64;
    let xi = (0..minor.n())
        .map(|k| {
            let u = minor.eigenvector(k).expect("minor spectrum must carry eigenvectors");
            let dot: Complex64 = u.iter().zip(a).map(|(u, a)| u.conj() * a).sum();
            nf * dot.norm_sqr()
        })
        .collect();
    Overlaps { lambda: minor.eigenvalues().to_vec(), xi }
}

/// `(H - z)^{-1}(j, j)` from the Schur complement formula.
pub fn schur_resolvent_entry(h_jj: f64, ov: &Overlaps, z: ComplexPoint, n: usize) -> Complex64 {
    let z = z.to_complex();
    let mut re = NeumaierSum::new();
    let mut im = NeumaierSum::new();
    for (&l, &x) in ov.lambda.iter().zip(&ov.xi) {
        let t = x / (l - z);
        re.add(t.re);
        im.add(t.im);
    }
    let s = Complex64::new(re.total(), im.total()) / n as f64;
    (h_jj - z - s).inv()
}

/// `(H - z)^{-1}(j, j)` by solving `(H - z) x = e_j` with partial pivoting.
pub fn direct_resolvent_entry(h: &HermitianMatrix, j: usize, z: ComplexPoint) -> Result<Complex64> {
    let n = h.n();
    if j >= n {
        return Err(Error::Domain(format!("row index {j} out of range for n = {n}")));
    }
    let zc = z.to_complex();
    let mut a: Vec<Complex64> = h.as_slice().to_vec();
    for k in 0..n {
        a[k * n + k] -= zc;
    }
    let mut rhs = vec![Complex64::new(0.0, 0.0); n];
    rhs[j] = Complex64::new(1.0, 0.0);
    for c in 0..n {
        let p = (c..n).max_by(|&x, &y| a[x * n + c].norm().total_cmp(&a[y * n + c].norm())).unwrap_or(c);
        if a[p * n + c].norm() == 0.0 {
            return Err(Error::Numeric(format!("singular system at column {c} for z = {} + {}i", z.re, z.im)));
        }
        if p != c {
            for k in 0..n {
                a.swap(p * n + k, c * n + k);
            }
            rhs.swap(p, c);
        }
        let pivot = a[c * n + c];
        for r in c + 1..n {
            let f = a[r * n + c] / pivot;
            if f == Complex64::new(0.0, 0.0) {
                continue;
            }
            for k in c..n {
                let v = a[c * n + k];
                a[r * n + k] -= f * v;
            }
            let v = rhs[c];
            rhs[r] -= f * v;
        }
    }
    let mut x = vec![Complex64::new(0.0, 0.0); n];
    for r in (0..n).rev() {
        let s: Complex64 = (r + 1..n).map(|k| a[r * n + k] * x[k]).sum();
        x[r] = (rhs[r] - s) / a[r * n + r];
    }
    Ok(x[j])
}

/// `|direct resolvent entry - Schur formula|` at `(j, j)`.
pub fn schur_resolvent_residual(h: &HermitianMatrix, j: usize, z: ComplexPoint) -> Result<f64> {
    if !(z.im > 0.0) {
        return Err(Error::Domain(format!("Im z = {} must be positive", z.im)));
    }
    let ov = overlaps(h, j)?;
    let schur = schur_resolvent_entry(h.diagonal(j), &ov, z, h.n());
    let direct = direct_resolvent_entry(h, j, z)?;
    Ok((direct - schur).norm())
}

/// The `c`, `d` coefficients and their derivatives in `E`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Coefficients {
    pub c: Vec<f64>,
    pub d: Vec<f64>,
    pub c_prime: Vec<f64>,
    pub d_prime: Vec<f64>,
}

/// With `x = N (lambda - E)` and `D = x^2 + eps^2`:
/// `c = eps / D`, `d = x / D`, `c' = 2 eps N x / D^2`, `d' = N (x^2 - eps^2) / D^2`.
pub fn coefficients(lambda: &[f64], e: f64, eps: f64, n: usize) -> Result<Coefficients> {
    if !(eps > 0.0) {
        return Err(Error::Domain(format!("eps = {eps} must be positive")));
    }
    let nf = n as f64;
    let len = lambda.len();
    let mut out = Coefficients {
        c: Vec::with_capacity(len),
        d: Vec::with_capacity(len),
        c_prime: Vec::with_capacity(len),
        d_prime: Vec::with_capacity(len),
    };
    let eps2 = eps * eps;
    for &l in lambda {
        let x = nf * (l - e);
        let den = x * x + eps2;
        out.c.push(eps / den);
        out.d.push(x / den);
        out.c_prime.push(2.0 * eps * nf * x / (den * den));
        out.d_prime.push(nf * (x * x - eps2) / (den * den));
    }
    Ok(out)
}

fn is_outside(l: f64, e: f64, eps: f64, nf: f64) -> bool {
    nf * (l - e).abs() >= eps
}

/// At least eight eigenvalues with `N |lambda - E| >= eps`.
pub fn good_event(lambda: &[f64], e: f64, eps: f64, n: usize) -> bool {
    let nf = n as f64;
    lambda.iter().filter(|&&l| is_outside(l, e, eps, nf)).count() >= GOOD_EVENT_COUNT
}

/// The indices `beta_0 .. beta_8` and `Delta = N |lambda_{beta_8} - E|`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IndexSelection {
    pub beta: [usize; 9],
    pub delta: f64,
}

/// `beta_0` is the eigenvalue closest to `E`; `beta_1 .. beta_8` are the next
/// eight by increasing distance among those with `N |lambda - E| >= eps`,
/// excluding `beta_0`. Ties go to the lower index.
pub fn select_indices(lambda: &[f64], e: f64, eps: f64, n: usize) -> Result<IndexSelection> {
    if !good_event(lambda, e, eps, n) {
        return Err(Error::Precondition(format!(
            "fewer than {GOOD_EVENT_COUNT} eigenvalues at distance >= eps/N from E = {e}"
        )));
    }
    let nf = n as f64;
    let dist = |a: usize| (lambda[a] - e).abs();
    let beta0 = (0..lambda.len()).min_by(|&a, &b| dist(a).total_cmp(&dist(b))).expect("non-empty");
    let mut candidates: Vec<usize> =
        (0..lambda.len()).filter(|&a| a != beta0 && is_outside(lambda[a], e, eps, nf)).collect();
    if candidates.len() < GOOD_EVENT_COUNT {
        return Err(Error::Precondition(format!(
            "only {} eligible eigenvalues remain after excluding the closest one",
            candidates.len()
        )));
    }
    candidates.sort_by(|&a, &b| dist(a).total_cmp(&dist(b)));
    let mut beta = [beta0; 9];
    beta[1..].copy_from_slice(&candidates[..GOOD_EVENT_COUNT]);
    Ok(IndexSelection { beta, delta: nf * dist(beta[8]) })
}

/// Outcome of checking the `|d|` and `|c|` chains on a selection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChainCheck {
    pub d_chain: bool,
    pub c_chain: bool,
    /// Largest relative amount by which any link is violated (0 when all hold).
    pub max_violation: f64,
}

impl ChainCheck {
    pub fn holds(&self) -> bool {
        self.d_chain && self.c_chain
    }
}

/// Relative slack granted to each link for rounding in the coefficient formulas.
const CHAIN_SLACK: f64 = 1e-14;

/// Checks `1/(2 Delta) <= |d_b8| <= ... <= |d_b1| <= 1/eps` and
/// `eps/(2 Delta^2) <= |c_b8| <= ... <= |c_b1| <= 1/eps`.
pub fn check_chains(coeffs: &Coefficients, sel: &IndexSelection, eps: f64) -> ChainCheck {
    let mut worst = 0.0f64;
    let mut link = |lo: f64, hi: f64| -> bool {
        let excess = (lo - hi) / hi.abs().max(f64::MIN_POSITIVE);
        worst = worst.max(excess);
        lo <= hi * (1.0 + CHAIN_SLACK)
    };
    let chain = |values: &[f64], floor: f64, link: &mut dyn FnMut(f64, f64) -> bool| -> bool {
        let picked: Vec<f64> = sel.beta[1..].iter().map(|&b| values[b].abs()).collect();
        let mut ok = link(floor, picked[7]);
        for w in picked.windows(2) {
            ok &= link(w[1], w[0]);
        }
        ok & link(picked[0], 1.0 / eps)
    };
    let d_chain = chain(&coeffs.d, 1.0 / (2.0 * sel.delta), &mut link);
    let c_chain = chain(&coeffs.c, eps / (2.0 * sel.delta * sel.delta), &mut link);
    ChainCheck { d_chain, c_chain, max_violation: worst.max(0.0) }
}

/// Everything computed for one `(H, j, E, eps)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MinorDiagnostics {
    pub n: usize,
    pub j: usize,
    pub energy: f64,
    pub eps: f64,
    pub lambda: Vec<f64>,
    pub xi: Vec<f64>,
    pub c: Vec<f64>,
    pub d: Vec<f64>,
    pub c_prime: Vec<f64>,
    pub d_prime: Vec<f64>,
    pub omega: bool,
    /// `beta_0 .. beta_8`; present only on the good event.
    pub beta: Option<[usize; 9]>,
    /// Present only on the good event.
    pub delta: Option<f64>,
    pub chains: Option<ChainCheck>,
}

pub fn diagnose(h: &HermitianMatrix, j: usize, e: f64, eps: f64) -> Result<MinorDiagnostics> {
    let n = h.n();
    let ov = overlaps(h, j)?;
    let coeffs = coefficients(&ov.lambda, e, eps, n)?;
    let omega = good_event(&ov.lambda, e, eps, n);
    let selection = if omega { select_indices(&ov.lambda, e, eps, n).ok() } else { None };
    let chains = selection.as_ref().map(|s| check_chains(&coeffs, s, eps));
    Ok(MinorDiagnostics {
        n,
        j,
        energy: e,
        eps,
        lambda: ov.lambda,
        xi: ov.xi,
        c: coeffs.c,
        d: coeffs.d,
        c_prime: coeffs.c_prime,
        d_prime: coeffs.d_prime,
        omega,
        beta: selection.map(|s| s.beta),
        delta: selection.map(|s| s.delta),
        chains,
    })
}

/// Least-squares fit of `log P(xi >= K) = log A - c K`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailFit {
    pub amplitude: f64,
    pub rate: f64,
    /// `(K, empirical P(xi >= K))` points used by the fit.
    pub points: Vec<(f64, f64)>,
}

/// Fits the overlap tail on the thresholds whose exceedance count is at
/// least `min_count`.
pub fn overlap_tail_fit(xi: &[f64], thresholds: &[f64], min_count: usize) -> Result<TailFit> {
    let total = xi.len() as f64;
    let points: Vec<(f64, f64)> = thresholds
        .iter()
        .filter_map(|&k| {
            let count = xi.iter().filter(|&&x| x >= k).count();
            (count >= min_count.max(1)).then_some((k, count as f64 / total))
        })
        .collect();
    if points.len() < 2 {
        return Err(Error::Domain(format!(
            "tail fit needs at least two thresholds with {min_count}+ exceedances, got {}",
            points.len()
        )));
    }
    let m = points.len() as f64;
    let mean_k = points.iter().map(|p| p.0).sum::<f64>() / m;
    let mean_y = points.iter().map(|p| p.1.ln()).sum::<f64>() / m;
    let sxy: f64 = points.iter().map(|p| (p.0 - mean_k) * (p.1.ln() - mean_y)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mean_k).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Domain("tail fit thresholds must not all coincide".into()));
    }
    let slope = sxy / sxx;
    Ok(TailFit { amplitude: (mean_y - slope * mean_k).exp(), rate: -slope, points })
}
