//! Entry laws and Wigner/GUE sampling.
//!
//! Off-diagonal entries are `(x + i y) / sqrt(n)` with `x, y` i.i.d. of mean 0
//! and variance 1/2; diagonal entries are `x / sqrt(n)` with variance 1. Every
//! built-in density has closed-form `h`, `h'` and `h''`, so the regularity
//! integrals can be evaluated without numerical differentiation. All built-ins
//! are sub-Gaussian by construction.

use std::f64::consts::SQRT_2;

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::quadrature::{integrate, QuadratureOptions};
use crate::{Error, HermitianMatrix, Result};

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistributionKind {
    Gaussian,
    /// `params = [w1, m1, s1, w2, m2, s2, ...]`: weights, means, standard deviations.
    GaussianMixture,
    /// `params = [width]`: uniform on `[-1, 1]` convolved with `N(0, width^2)`.
    SmoothedUniform,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntryRole {
    OffDiagonal,
    Diagonal,
}

impl EntryRole {
    pub fn variance(self) -> f64 {
        match self {
            EntryRole::OffDiagonal => 0.5,
            EntryRole::Diagonal => 1.0,
        }
    }
}

/// Parametric entry density. The raw parameters describe a shape; the law is
/// always shifted and rescaled to mean 0 and the variance required by `role`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionSpec {
    pub kind: DistributionKind,
    #[serde(default)]
    pub params: Vec<f64>,
    pub role: EntryRole,
}

pub const DEFAULT_SMOOTHING_WIDTH: f64 = 0.25;

impl DistributionSpec {
    pub fn gaussian(role: EntryRole) -> Self {
        Self { kind: DistributionKind::Gaussian, params: Vec::new(), role }
    }

    /// Mixture from `(weight, mean, std_dev)` triples.
    pub fn gaussian_mixture(role: EntryRole, components: &[(f64, f64, f64)]) -> Self {
        let params = components.iter().flat_map(|&(w, m, s)| [w, m, s]).collect();
        Self { kind: DistributionKind::GaussianMixture, params, role }
    }

    pub fn smoothed_uniform(role: EntryRole, width: f64) -> Self {
        Self { kind: DistributionKind::SmoothedUniform, params: vec![width], role }
    }

    /// A default-parameter spec of the given kind, for CLI shorthands.
    pub fn default_of_kind(kind: DistributionKind, role: EntryRole) -> Self {
        match kind {
            DistributionKind::Gaussian => Self::gaussian(role),
            DistributionKind::GaussianMixture => Self::gaussian_mixture(role, &[(0.5, -1.0, 0.6), (0.5, 1.0, 0.6)]),
            DistributionKind::SmoothedUniform => Self::smoothed_uniform(role, DEFAULT_SMOOTHING_WIDTH),
        }
    }

    /// The same shape with another role (and hence another target variance).
    pub fn with_role(&self, role: EntryRole) -> Self {
        Self { role, ..self.clone() }
    }

    /// Validate the parameters and build the standardized law.
    pub fn law(&self) -> Result<EntryLaw> {
        let sigma = self.role.variance().sqrt();
        match self.kind {
            DistributionKind::Gaussian => {
                if !self.params.is_empty() {
                    return Err(Error::Config("gaussian takes no parameters".into()));
                }
                Ok(EntryLaw::Gaussian { sigma })
            }
            DistributionKind::GaussianMixture => mixture_law(&self.params, sigma),
            DistributionKind::SmoothedUniform => {
                let width = match self.params.as_slice() {
                    [] => DEFAULT_SMOOTHING_WIDTH,
                    [w] => *w,
                    _ => return Err(Error::Config("smoothed_uniform takes a single width parameter".into())),
                };
                if !(width.is_finite() && width > 0.0) {
                    return Err(Error::Config(format!("smoothing width must be positive, got {width}")));
                }
                let scale = sigma / (1.0 / 3.0 + width * width).sqrt();
                Ok(EntryLaw::SmoothedUniform { half_width: scale, smoothing: scale * width })
            }
        }
    }
}

fn mixture_law(params: &[f64], sigma: f64) -> Result<EntryLaw> {
    if params.is_empty() || !params.len().is_multiple_of(3) {
        return Err(Error::Config(format!(
            "gaussian_mixture needs (weight, mean, std) triples, got {} parameters",
            params.len()
        )));
    }
    let raw: Vec<(f64, f64, f64)> = params.chunks_exact(3).map(|c| (c[0], c[1], c[2])).collect();
    for (i, &(w, m, s)) in raw.iter().enumerate() {
        if !(w.is_finite() && w > 0.0) {
            return Err(Error::Config(format!("mixture weight {i} must be positive, got {w}")));
        }
        if !(s.is_finite() && s > 0.0) || !m.is_finite() {
            return Err(Error::Config(format!("mixture component {i} has invalid mean/std ({m}, {s})")));
        }
    }
    let total: f64 = raw.iter().map(|c| c.0).sum();
    if (total - 1.0).abs() > 1e-12 {
        return Err(Error::Config(format!("mixture weights must sum to 1, got {total}")));
    }
    let mean: f64 = raw.iter().map(|&(w, m, _)| w * m).sum();
    // Centered form keeps a single component exact: var == s^2.
    let var: f64 = raw.iter().map(|&(w, m, s)| w * (s * s + (m - mean) * (m - mean))).sum();
    let sd = var.sqrt();
    let components = raw
        .iter()
        .map(|&(w, m, s)| MixtureComponent { weight: w, mean: (m - mean) * (sigma / sd), scale: sigma * (s / sd) })
        .collect();
    Ok(EntryLaw::Mixture { components })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MixtureComponent {
    pub weight: f64,
    pub mean: f64,
    pub scale: f64,
}

/// A validated, standardized entry density with closed-form derivatives.
#[derive(Debug, Clone, PartialEq)]
pub enum EntryLaw {
    Gaussian {
        sigma: f64,
    },
    Mixture {
        components: Vec<MixtureComponent>,
    },
    /// Uniform on `[-half_width, half_width]` convolved with `N(0, smoothing^2)`.
    SmoothedUniform {
        half_width: f64,
        smoothing: f64,
    },
}

fn upper_tail(x: f64) -> f64 {
    0.5 * libm::erfc(x / SQRT_2)
}

fn std_normal_pdf(x: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * x * x).exp()
}

impl EntryLaw {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            EntryLaw::Gaussian { sigma } => {
                let z: f64 = rng.sample(StandardNormal);
                sigma * z
            }
            EntryLaw::Mixture { components } => {
                let c = if components.len() == 1 {
                    &components[0]
                } else {
                    let u: f64 = rng.random();
                    let mut acc = 0.0;
                    components
                        .iter()
                        .find(|c| {
                            acc += c.weight;
                            u < acc
                        })
                        .unwrap_or_else(|| components.last().expect("validated non-empty"))
                };
                let z: f64 = rng.sample(StandardNormal);
                c.mean + c.scale * z
            }
            EntryLaw::SmoothedUniform { half_width, smoothing } => {
                let u: f64 = rng.random();
                let z: f64 = rng.sample(StandardNormal);
                half_width * (2.0 * u - 1.0) + smoothing * z
            }
        }
    }

    pub fn mean(&self) -> f64 {
        match self {
            EntryLaw::Mixture { components } => components.iter().map(|c| c.weight * c.mean).sum(),
            _ => 0.0,
        }
    }

    pub fn variance(&self) -> f64 {
        match self {
            EntryLaw::Gaussian { sigma } => sigma * sigma,
            EntryLaw::Mixture { components } => {
                let mu = self.mean();
                components.iter().map(|c| c.weight * (c.scale * c.scale + (c.mean - mu) * (c.mean - mu))).sum()
            }
            EntryLaw::SmoothedUniform { half_width, smoothing } => {
                half_width * half_width / 3.0 + smoothing * smoothing
            }
        }
    }

    /// Density `h(s)`.
    pub fn pdf(&self, s: f64) -> f64 {
        self.derivatives(s)[0]
    }

    /// `[h(s), h'(s), h''(s)]` in closed form.
    pub fn derivatives(&self, s: f64) -> [f64; 3] {
        match self {
            EntryLaw::Gaussian { sigma } => {
                let x = s / sigma;
                let h = std_normal_pdf(x) / sigma;
                [h, -x / sigma * h, (x * x - 1.0) / (sigma * sigma) * h]
            }
            EntryLaw::Mixture { components } => components.iter().fold([0.0; 3], |acc, c| {
                let x = (s - c.mean) / c.scale;
                let h = c.weight * std_normal_pdf(x) / c.scale;
                [acc[0] + h, acc[1] - x / c.scale * h, acc[2] + (x * x - 1.0) / (c.scale * c.scale) * h]
            }),
            &EntryLaw::SmoothedUniform { half_width, smoothing } => {
                let norm = 1.0 / (2.0 * half_width);
                // h is even; evaluate at |s| so the tail difference is taken
                // between two upper-tail probabilities without cancellation.
                let t = s.abs();
                let a = (t + half_width) / smoothing;
                let b = (t - half_width) / smoothing;
                let mass = if b >= 0.0 { upper_tail(b) - upper_tail(a) } else { 1.0 - upper_tail(-b) - upper_tail(a) };
                let h = norm * mass;
                let d1 = norm / smoothing * (std_normal_pdf(a) - std_normal_pdf(b));
                let d2 = norm / (smoothing * smoothing) * (b * std_normal_pdf(b) - a * std_normal_pdf(a));
                [h, if s < 0.0 { -d1 } else { d1 }, d2]
            }
        }
    }

    /// Half-length of a symmetric window outside which `h` is negligible for
    /// the regularity integrals (far below double precision relative to them).
    pub fn effective_radius(&self) -> f64 {
        match self {
            EntryLaw::Gaussian { sigma } => 20.0 * sigma,
            EntryLaw::Mixture { components } => {
                components.iter().map(|c| c.mean.abs() + 20.0 * c.scale).fold(0.0, f64::max)
            }
            EntryLaw::SmoothedUniform { half_width, smoothing } => half_width + 20.0 * smoothing,
        }
    }

    fn breakpoints(&self) -> Vec<f64> {
        let r = self.effective_radius();
        let mut pts = vec![-r, 0.0, r];
        match self {
            EntryLaw::Gaussian { .. } => {}
            EntryLaw::Mixture { components } => pts.extend(components.iter().map(|c| c.mean)),
            EntryLaw::SmoothedUniform { half_width, .. } => pts.extend([-half_width, *half_width]),
        }
        pts.sort_by(f64::total_cmp);
        pts.dedup();
        pts
    }
}

/// The three integrals of the entry-regularity hypotheses.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RegularityIntegrals {
    /// `∫ |h'/h|^6 h`
    pub i6: f64,
    /// `∫ |h'/h|^4 h`
    pub i4: f64,
    /// `∫ |h''/h|^2 h`
    pub i2pp: f64,
}

pub fn regularity_integrals(dist: &DistributionSpec) -> Result<RegularityIntegrals> {
    let law = dist.law()?;
    let pts = law.breakpoints();
    let opts = QuadratureOptions { abs_tol: 0.0, rel_tol: 1e-11, max_intervals: 4000 };
    let piecewise = |g: &dyn Fn(f64) -> f64, what: &str| -> Result<f64> {
        let mut total = 0.0;
        for w in pts.windows(2) {
            let q = integrate(g, w[0], w[1], opts)
                .map_err(|e| Error::Numeric(format!("{what} for {:?} on [{}, {}]: {e}", dist.kind, w[0], w[1])))?;
            total += q.value;
        }
        Ok(total)
    };
    let ratio_power = |s: f64, order: usize, p: i32| -> f64 {
        let d = law.derivatives(s);
        if d[0] <= 0.0 {
            return 0.0;
        }
        (d[order] / d[0]).abs().powi(p) * d[0]
    };
    Ok(RegularityIntegrals {
        i6: piecewise(&|s| ratio_power(s, 1, 6), "I6")?,
        i4: piecewise(&|s| ratio_power(s, 1, 4), "I4")?,
        i2pp: piecewise(&|s| ratio_power(s, 2, 2), "I2pp")?,
    })
}

/// Identifies one random stream: sample `stream_index` of the experiment
/// seeded with `master_seed`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SeedSpec {
    pub master_seed: u64,
    pub stream_index: u64,
}

impl SeedSpec {
    pub fn new(master_seed: u64, stream_index: u64) -> Self {
        Self { master_seed, stream_index }
    }

    /// ChaCha8 keyed by the master seed, positioned on stream `stream_index`.
    /// Streams are disjoint keystreams, so no state is shared between samples.
    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master_seed);
        rng.set_stream(self.stream_index);
        rng
    }
}

/// SplitMix64 finalizer applied to `master ^ salt`; used to give each
/// sub-experiment (e.g. each matrix size) its own master seed.
pub fn derive_seed(master: u64, salt: u64) -> u64 {
    let mut z = master ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Draw one value from `dist` on the stream `seed`.
pub fn sample_entry(dist: &DistributionSpec, seed: SeedSpec) -> Result<f64> {
    let law = dist.law()?;
    Ok(law.sample(&mut seed.rng()))
}

/// A Wigner ensemble with validated entry laws, ready for repeated sampling.
#[derive(Debug, Clone)]
pub struct WignerEnsemble {
    n: usize,
    off: EntryLaw,
    diag: EntryLaw,
}

impl WignerEnsemble {
    pub fn new(n: usize, off: &DistributionSpec, diag: &DistributionSpec) -> Result<Self> {
        if n == 0 {
            return Err(Error::Domain("matrix dimension must be positive".into()));
        }
        if off.role != EntryRole::OffDiagonal || diag.role != EntryRole::Diagonal {
            return Err(Error::Config("off/diagonal specs must carry the off_diagonal/diagonal roles".into()));
        }
        Ok(Self { n, off: off.law()?, diag: diag.law()? })
    }

    pub fn gue(n: usize) -> Result<Self> {
        Self::new(
            n,
            &DistributionSpec::gaussian(EntryRole::OffDiagonal),
            &DistributionSpec::gaussian(EntryRole::Diagonal),
        )
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Row by row: `x_jj`, then `(x_jk, y_jk)` for `k > j`; all scaled by `1/sqrt(n)`.
    pub fn sample(&self, seed: SeedSpec) -> HermitianMatrix {
        let mut rng = seed.rng();
        let scale = 1.0 / (self.n as f64).sqrt();
        HermitianMatrix::from_upper_fn(self.n, |j, k| {
            if j == k {
                Complex64::new(self.diag.sample(&mut rng) * scale, 0.0)
            } else {
                let x = self.off.sample(&mut rng);
                let y = self.off.sample(&mut rng);
                Complex64::new(x * scale, y * scale)
            }
        })
        .expect("dimension validated at construction")
    }
}

pub fn sample_wigner(
    n: usize,
    off: &DistributionSpec,
    diag: &DistributionSpec,
    seed: SeedSpec,
) -> Result<HermitianMatrix> {
    Ok(WignerEnsemble::new(n, off, diag)?.sample(seed))
}

pub fn sample_gue(n: usize, seed: SeedSpec) -> Result<HermitianMatrix> {
    Ok(WignerEnsemble::gue(n)?.sample(seed))
}
