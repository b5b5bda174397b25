//! Semicircle reference quantities and per-spectrum statistics.
//!
//! The semicircle density is normalised to unit mass,
//! `rho_sc(E) = sqrt(4 - E^2) / (2 pi)` on `[-2, 2]`, so that
//! `Im m_sc(E + i0) = pi rho_sc(E)` in the bulk.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::eigensolver::Spectrum;
use crate::quadrature::{integrate, QuadratureOptions};
use crate::summation::NeumaierSum;
use crate::{Error, Result};

/// Largest point set accepted by [`sine_kernel_det`].
pub const MAX_SINE_KERNEL_POINTS: usize = 6;
/// Largest dimension accepted by [`gue_log_density`].
pub const MAX_GUE_DENSITY_DIM: usize = 8;
/// Largest dimension for which [`gue_normalization`] integrates numerically.
pub const MAX_GUE_NORMALIZATION_DIM: usize = 3;

/// A point `E + i eta` of the upper half-plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComplexPoint {
    pub re: f64,
    pub im: f64,
}

impl ComplexPoint {
    pub fn new(re: f64, im: f64) -> Self {
        Self { re, im }
    }

    pub fn to_complex(self) -> Complex64 {
        Complex64::new(self.re, self.im)
    }

    fn check_upper(self) -> Result<()> {
        if !(self.im > 0.0) || !self.re.is_finite() || !self.im.is_finite() {
            return Err(Error::Domain(format!(
                "z = {} + {}i must be finite with positive imaginary part",
                self.re, self.im
            )));
        }
        Ok(())
    }
}

/// Semicircle density.
pub fn rho_sc(e: f64) -> f64 {
    if e.abs() < 2.0 {
        (4.0 - e * e).sqrt() / (2.0 * PI)
    } else {
        0.0
    }
}

/// Stieltjes transform of the semicircle law: the root of `m^2 + z m + 1 = 0`
/// with positive imaginary part.
pub fn m_sc(z: ComplexPoint) -> Result<Complex64> {
    z.check_upper()?;
    let z = z.to_complex();
    let s = (z * z - 4.0).sqrt();
    // The root of larger modulus is computed without cancellation; the other
    // one follows from the product of the roots being 1.
    let big = if (z.conj() * s).re >= 0.0 { (-z - s) * 0.5 } else { (-z + s) * 0.5 };
    let small = big.inv();
    Ok(if big.im > 0.0 { big } else { small })
}

/// Semicircle distribution function.
pub fn f_sc(e: f64) -> f64 {
    if e <= -2.0 {
        0.0
    } else if e >= 2.0 {
        1.0
    } else {
        0.5 + e * (4.0 - e * e).sqrt() / (4.0 * PI) + (e / 2.0).asin() / PI
    }
}

/// Inverse of [`f_sc`] on `[0, 1]`, by bisection to machine precision.
pub fn f_sc_inverse(p: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Domain(format!("probability {p} outside [0, 1]")));
    }
    let (mut lo, mut hi) = (-2.0f64, 2.0f64);
    while hi - lo > 0.0 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f_sc(mid) < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(if (f_sc(lo) - p).abs() <= (f_sc(hi) - p).abs() { lo } else { hi })
}

/// Energy window holding the central `fraction` of the semicircle mass.
pub fn central_window(fraction: f64) -> Result<(f64, f64)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::Domain(format!("bulk fraction {fraction} must lie in (0, 1)")));
    }
    let hi = f_sc_inverse(0.5 + 0.5 * fraction)?;
    Ok((-hi, hi))
}

/// Number of eigenvalues in the closed interval `[a, b]`.
pub fn counting(spec: &Spectrum, a: f64, b: f64) -> Result<usize> {
    if !(a <= b) {
        return Err(Error::Domain(format!("counting interval [{a}, {b}] is empty or not ordered")));
    }
    let ev = spec.eigenvalues();
    let lo = ev.partition_point(|&x| x < a);
    let hi = ev.partition_point(|&x| x <= b);
    Ok(hi - lo)
}

/// Empirical Stieltjes transform `m_N(z) = (1/N) sum 1/(mu - z)`.
pub fn stieltjes(spec: &Spectrum, z: ComplexPoint) -> Result<Complex64> {
    z.check_upper()?;
    let mut re = NeumaierSum::new();
    let mut im = NeumaierSum::new();
    for &mu in spec.eigenvalues() {
        let x = mu - z.re;
        let d = x * x + z.im * z.im;
        re.add(x / d);
        im.add(z.im / d);
    }
    let n = spec.n() as f64;
    Ok(Complex64::new(re.total() / n, im.total() / n))
}

/// `Im m_N(z)`: the Poisson-kernel sum `(1/N) sum eta / ((mu - E)^2 + eta^2)`.
pub fn im_stieltjes(spec: &Spectrum, z: ComplexPoint) -> Result<f64> {
    z.check_upper()?;
    let eta2 = z.im * z.im;
    let acc: NeumaierSum = spec
        .eigenvalues()
        .iter()
        .map(|&mu| {
            let x = mu - z.re;
            z.im / (x * x + eta2)
        })
        .collect();
    Ok(acc.total() / spec.n() as f64)
}

/// Window average `(1/eta) ∫_{E-eta/2}^{E+eta/2} Im m_N(x + i eta') dx`,
/// evaluated in closed form through arctangents. As `eta' -> 0` it tends to
/// `pi N[E - eta/2; E + eta/2] / (N eta)`.
pub fn window_averaged_im_stieltjes(spec: &Spectrum, e: f64, eta: f64, eta_prime: f64) -> Result<f64> {
    if !(eta > 0.0) || !(eta_prime > 0.0) {
        return Err(Error::Domain(format!("window width {eta} and smoothing {eta_prime} must be positive")));
    }
    let (a, b) = (e - 0.5 * eta, e + 0.5 * eta);
    let acc: NeumaierSum =
        spec.eigenvalues().iter().map(|&mu| ((b - mu) / eta_prime).atan() - ((a - mu) / eta_prime).atan()).collect();
    Ok(acc.total() / (spec.n() as f64 * eta))
}

/// Both sides of the dyadic upper bound on `Im m_N(E + i eps)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DyadicBound {
    pub lhs: f64,
    pub rhs: f64,
    /// Number of annuli `2^l eps < |mu - E| <= 2^(l+1) eps` summed.
    pub annuli: usize,
}

/// `Im m_N(E + i eps)` against the bound obtained by splitting the spectrum
/// into `|mu - E| <= eps` and dyadic annuli around `E`.
pub fn dyadic_bound(spec: &Spectrum, e: f64, eps: f64) -> Result<DyadicBound> {
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(Error::Domain(format!("eps = {eps} must be positive and finite")));
    }
    let lhs = im_stieltjes(spec, ComplexPoint::new(e, eps))?;
    let n = spec.n() as f64;
    let ev = spec.eigenvalues();
    let max_dist = (ev[0] - e).abs().max((ev[ev.len() - 1] - e).abs());
    let mut rhs = NeumaierSum::new();
    rhs.add(counting(spec, e - eps, e + eps)? as f64 / (n * eps));
    let mut annuli = 0;
    let mut inner = eps;
    while inner < max_dist {
        let outer = 2.0 * inner;
        let count = ev
            .iter()
            .filter(|&&mu| {
                let d = (mu - e).abs();
                d > inner && d <= outer
            })
            .count();
        // eps / (2^(2l) eps^2) with inner = 2^l eps.
        rhs.add(count as f64 * eps / (n * inner * inner));
        annuli += 1;
        inner = outer;
    }
    Ok(DyadicBound { lhs, rhs: rhs.total(), annuli })
}

fn sinc_pi(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        (PI * x).sin() / (PI * x)
    }
}

/// Determinant of the sine-kernel matrix `[sin(pi(x_j - x_l)) / (pi(x_j - x_l))]`.
pub fn sine_kernel_det(points: &[f64]) -> Result<f64> {
    let k = points.len();
    if k == 0 || k > MAX_SINE_KERNEL_POINTS {
        return Err(Error::Domain(format!(
            "sine-kernel determinant needs 1..={MAX_SINE_KERNEL_POINTS} points, got {k}"
        )));
    }
    let mut a: Vec<f64> = (0..k * k).map(|i| sinc_pi(points[i / k] - points[i % k])).collect();
    Ok(determinant(&mut a, k))
}

/// Determinant by Gaussian elimination with partial pivoting (destroys `a`).
fn determinant(a: &mut [f64], k: usize) -> f64 {
    let mut det = 1.0;
    for c in 0..k {
        let p = (c..k).max_by(|&x, &y| a[x * k + c].abs().total_cmp(&a[y * k + c].abs())).unwrap_or(c);
        if a[p * k + c] == 0.0 {
            return 0.0;
        }
        if p != c {
            for j in 0..k {
                a.swap(p * k + j, c * k + j);
            }
            det = -det;
        }
        let pivot = a[c * k + c];
        det *= pivot;
        for r in c + 1..k {
            let f = a[r * k + c] / pivot;
            for j in c..k {
                a[r * k + j] -= f * a[c * k + j];
            }
        }
    }
    det
}

/// Unnormalised log joint density of GUE eigenvalues (unordered):
/// `sum_{i<j} 2 log|mu_i - mu_j| - (N/2) sum mu_j^2`.
///
/// Returns `-inf` when two points coincide.
pub fn gue_log_density(mu: &[f64], n: usize) -> Result<f64> {
    if mu.len() != n || n == 0 || n > MAX_GUE_DENSITY_DIM {
        return Err(Error::Domain(format!(
            "expected {n} points with 1 <= N <= {MAX_GUE_DENSITY_DIM}, got {}",
            mu.len()
        )));
    }
    let mut acc = NeumaierSum::new();
    for i in 0..n {
        for j in i + 1..n {
            let d = (mu[i] - mu[j]).abs();
            if d == 0.0 {
                return Ok(f64::NEG_INFINITY);
            }
            acc.add(2.0 * d.ln());
        }
        acc.add(-0.5 * n as f64 * mu[i] * mu[i]);
    }
    Ok(acc.total())
}

/// `∫ exp(gue_log_density(mu, N)) dmu` over `R^N`, by nested adaptive quadrature.
pub fn gue_normalization(n: usize) -> Result<f64> {
    if n == 0 || n > MAX_GUE_NORMALIZATION_DIM {
        return Err(Error::Domain(format!(
            "normalisation is integrated only for 1 <= N <= {MAX_GUE_NORMALIZATION_DIM}, got {n}"
        )));
    }
    // exp(-(N/2) mu^2) is below 1e-17 beyond this radius.
    let radius = 9.0 / (n as f64).sqrt();
    let opts = QuadratureOptions { abs_tol: 0.0, rel_tol: 1e-10, max_intervals: 2000 };
    let value = nested(&[], n, radius, opts);
    if !value.is_finite() {
        return Err(Error::Numeric(format!("GUE normalisation quadrature failed for N = {n}")));
    }
    Ok(value)
}

/// Integral over the remaining coordinates with `prefix` held fixed; NaN on failure.
fn nested(prefix: &[f64], n: usize, radius: f64, opts: QuadratureOptions) -> f64 {
    let result = integrate(
        |x| {
            let mut p = prefix.to_vec();
            p.push(x);
            if p.len() == n {
                gue_log_density(&p, n).map(f64::exp).unwrap_or(f64::NAN)
            } else {
                nested(&p, n, radius, opts)
            }
        },
        -radius,
        radius,
        opts,
    );
    result.map(|q| q.value).unwrap_or(f64::NAN)
}

/// Closed form of [`gue_normalization`]:
/// `(2 pi)^(N/2) prod_{j=1}^N j! N^(-N^2/2)`.
pub fn gue_normalization_closed_form(n: usize) -> f64 {
    let nf = n as f64;
    let mut log = 0.5 * nf * (2.0 * PI).ln() - 0.5 * nf * nf * nf.ln();
    let mut log_fact = 0.0;
    for j in 1..=n {
        log_fact += (j as f64).ln();
        log += log_fact;
    }
    log.exp()
}

/// Unfolded nearest-neighbour spacings from one spectrum.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpacingSample {
    pub spacings: Vec<f64>,
    pub window: (f64, f64),
}

/// Spacings `N (F_sc(mu_{i+1}) - F_sc(mu_i))` of consecutive eigenvalues in
/// the closed `window`, which must lie inside `(-2, 2)`. Zero spacings from
/// coincident eigenvalues are dropped.
pub fn unfolded_spacings(spec: &Spectrum, window: (f64, f64)) -> Result<SpacingSample> {
    let (lo, hi) = window;
    if !(-2.0 < lo && lo < hi && hi < 2.0) {
        return Err(Error::Domain(format!("spacing window ({lo}, {hi}) must satisfy -2 < lo < hi < 2")));
    }
    let n = spec.n() as f64;
    let ev = spec.eigenvalues();
    let start = ev.partition_point(|&x| x < lo);
    let end = ev.partition_point(|&x| x <= hi);
    let unfolded: Vec<f64> = ev[start..end].iter().map(|&mu| n * f_sc(mu)).collect();
    let spacings = unfolded.windows(2).map(|w| w[1] - w[0]).filter(|&s| s > 0.0).collect();
    Ok(SpacingSample { spacings, window })
}

const SURMISE_A: f64 = 4.0 / PI;

/// GUE Wigner surmise `p(s) = (32/pi^2) s^2 exp(-4 s^2 / pi)`.
pub fn wigner_surmise_gue(s: f64) -> Result<f64> {
    if !(s >= 0.0) {
        return Err(Error::Domain(format!("spacing {s} must be non-negative")));
    }
    Ok(32.0 / (PI * PI) * s * s * (-SURMISE_A * s * s).exp())
}

/// Distribution function of the GUE Wigner surmise (0 for `s <= 0`).
pub fn wigner_surmise_gue_cdf(s: f64) -> f64 {
    if s <= 0.0 {
        return 0.0;
    }
    let a = SURMISE_A;
    let erf_term = PI.sqrt() / (4.0 * a * a.sqrt()) * libm::erf(a.sqrt() * s);
    let exp_term = s * (-a * s * s).exp() / (2.0 * a);
    (32.0 / (PI * PI) * (erf_term - exp_term)).clamp(0.0, 1.0)
}

/// Kolmogorov–Smirnov distance between a sample and a continuous distribution function.
pub fn ks_distance<F: Fn(f64) -> f64>(sample: &[f64], cdf: F) -> Result<f64> {
    if sample.is_empty() {
        return Err(Error::Domain("KS distance of an empty sample".into()));
    }
    let mut sorted = sample.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mut d = 0.0f64;
    for (i, &x) in sorted.iter().enumerate() {
        let f = cdf(x);
        d = d.max((i + 1) as f64 / n - f).max(f - i as f64 / n);
    }
    Ok(d)
}
