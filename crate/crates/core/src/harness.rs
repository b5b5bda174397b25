//! Declarative Monte Carlo experiments.
//!
//! Every experiment follows the same pattern: for each matrix size `N`,
//! sample `i` is drawn from the stream `(derive_seed(seed, N), i)`, decomposed
//! once, and reduced to a fixed-length vector of statistics. The vectors are
//! collected in sample order and aggregated sequentially with compensated
//! sums, so results are bit-identical for any worker count.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize};

use crate::diagnostics::{good_event, select_indices};
use crate::eigensolver::{eigvalsh, Spectrum};
use crate::ensembles::{derive_seed, DistributionSpec, EntryRole, SeedSpec, WignerEnsemble};
use crate::spectral::{
    central_window, counting, f_sc, im_stieltjes, ks_distance, rho_sc, unfolded_spacings, wigner_surmise_gue_cdf,
    window_averaged_im_stieltjes, ComplexPoint,
};
use crate::summation::{median, SampleMoments};
use crate::{Error, Result};

/// Runs with `N * eta` below this are flagged as sub-microscopic.
pub const SUB_MICROSCOPIC_THRESHOLD: f64 = 0.05;
/// Relative predicted standard error above which `im_stieltjes` warns.
pub const STDERR_WARNING_FRACTION: f64 = 0.2;
pub const DEFAULT_KAPPA: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Dos,
    ImStieltjes,
    Wegner,
    Derivative,
    ScaleSweep,
    DeltaMoments,
    Spacing,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Dos => "dos",
            Self::ImStieltjes => "im_stieltjes",
            Self::Wegner => "wegner",
            Self::Derivative => "derivative",
            Self::ScaleSweep => "scale_sweep",
            Self::DeltaMoments => "delta_moments",
            Self::Spacing => "spacing",
        }
    }
}

/// A length scale, either absolute or relative to the matrix size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scale {
    Absolute(f64),
    /// `K / N`
    OverN(f64),
    /// `c / N^(3/2)`
    #[serde(rename = "over_n_3_2")]
    OverN32(f64),
}

impl Scale {
    pub fn at(self, n: usize) -> f64 {
        let nf = n as f64;
        match self {
            Self::Absolute(v) => v,
            Self::OverN(k) => k / nf,
            Self::OverN32(c) => c / (nf * nf.sqrt()),
        }
    }

    pub fn coefficient(self) -> f64 {
        match self {
            Self::Absolute(v) | Self::OverN(v) | Self::OverN32(v) => v,
        }
    }

    pub fn label(self) -> String {
        match self {
            Self::Absolute(v) => format!("{v}"),
            Self::OverN(k) => format!("{k}/N"),
            Self::OverN32(c) => format!("{c}/N^1.5"),
        }
    }
}

/// Off-diagonal and diagonal entry laws.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistPair {
    pub off: DistributionSpec,
    pub diag: DistributionSpec,
}

impl Default for DistPair {
    fn default() -> Self {
        Self {
            off: DistributionSpec::gaussian(EntryRole::OffDiagonal),
            diag: DistributionSpec::gaussian(EntryRole::Diagonal),
        }
    }
}

/// Kind-specific parameters.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Extra {
    /// Finite-difference half-step for `derivative`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta_e: Option<Scale>,
    /// Moment orders for `delta_moments` (default `[0, 1, 2]`).
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub moments: Vec<u32>,
    /// Rescaled radii `delta` for `delta_moments` (default `[0.5, 0.1, 0.02]`).
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub deltas: Vec<f64>,
    /// `eps` of the good event for `delta_moments` (default 1).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    /// Fraction of the semicircle mass used by `spacing` (default 0.5).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bulk_fraction: Option<f64>,
    /// Smoothing scale of the arctangent window average reported by `dos`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eta_prime: Option<Scale>,
}

/// A Monte Carlo experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub kind: ExperimentKind,
    #[serde(deserialize_with = "one_or_many")]
    pub n: Vec<usize>,
    pub samples: usize,
    #[serde(deserialize_with = "one_or_many", default = "default_energy")]
    pub energy: Vec<f64>,
    #[serde(deserialize_with = "one_or_many", default)]
    pub eta: Vec<Scale>,
    #[serde(default)]
    pub dist: DistPair,
    pub seed: u64,
    #[serde(default = "default_kappa")]
    pub kappa: f64,
    #[serde(default)]
    pub extra: Extra,
}

fn default_energy() -> Vec<f64> {
    vec![0.0]
}

fn default_kappa() -> f64 {
    DEFAULT_KAPPA
}

fn one_or_many<'de, D, T>(d: D) -> std::result::Result<Vec<T>, D::Error>
where
    D: Deserializer<'de>,
    T: Deserialize<'de>,
{
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum OneOrMany<T> {
        One(T),
        Many(Vec<T>),
    }
    Ok(match OneOrMany::deserialize(d)? {
        OneOrMany::One(v) => vec![v],
        OneOrMany::Many(v) => v,
    })
}

impl ExperimentSpec {
    /// A spec with Gaussian entries, `energy = [0]` and no scales.
    pub fn new(kind: ExperimentKind, n: &[usize], samples: usize, seed: u64) -> Self {
        Self {
            kind,
            n: n.to_vec(),
            samples,
            energy: default_energy(),
            eta: Vec::new(),
            dist: DistPair::default(),
            seed,
            kappa: DEFAULT_KAPPA,
            extra: Extra::default(),
        }
    }

    pub fn with_energy(mut self, energy: &[f64]) -> Self {
        self.energy = energy.to_vec();
        self
    }

    pub fn with_eta(mut self, eta: &[Scale]) -> Self {
        self.eta = eta.to_vec();
        self
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: Self =
            serde_json::from_str(text).map_err(|e| Error::Config(format!("invalid experiment spec: {e}")))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let cfg = |m: String| Err(Error::Config(m));
        if self.samples == 0 {
            return cfg("samples must be at least 1".into());
        }
        if self.n.is_empty() || self.n.contains(&0) {
            return cfg("n must be a non-empty list of positive sizes".into());
        }
        if !(0.0..2.0).contains(&self.kappa) {
            return cfg(format!("kappa = {} must lie in [0, 2)", self.kappa));
        }
        if self.energy.is_empty() {
            return cfg("energy grid is empty".into());
        }
        let edge = 2.0 - self.kappa;
        if let Some(e) = self.energy.iter().find(|e| !(e.abs() < edge)) {
            return cfg(format!("energy {e} outside the bulk (-{edge}, {edge}) for kappa = {}", self.kappa));
        }
        if let Some(s) = self.eta.iter().find(|s| !(s.coefficient() > 0.0 && s.coefficient().is_finite())) {
            return cfg(format!("eta must be positive, got {}", s.label()));
        }
        if self.dist.off.role != EntryRole::OffDiagonal || self.dist.diag.role != EntryRole::Diagonal {
            return cfg("dist.off/dist.diag must carry the off_diagonal/diagonal roles".into());
        }
        self.dist.off.law()?;
        self.dist.diag.law()?;
        let needs_eta = matches!(
            self.kind,
            ExperimentKind::Dos
                | ExperimentKind::ImStieltjes
                | ExperimentKind::Wegner
                | ExperimentKind::Derivative
                | ExperimentKind::ScaleSweep
        );
        if needs_eta && self.eta.is_empty() {
            return cfg(format!("{} needs at least one eta", self.kind.name()));
        }
        match self.kind {
            ExperimentKind::Derivative => match self.extra.delta_e {
                Some(s) if s.coefficient() > 0.0 && s.coefficient().is_finite() => {}
                Some(s) => return cfg(format!("delta_e must be positive, got {}", s.label())),
                None => return cfg("derivative needs extra.delta_e".into()),
            },
            ExperimentKind::DeltaMoments => {
                if let Some(eps) = self.extra.eps {
                    if !(eps > 0.0 && eps <= 1.0) {
                        return cfg(format!("eps = {eps} must lie in (0, 1]"));
                    }
                }
                if self.extra.deltas.iter().any(|d| !(*d > 0.0)) {
                    return cfg("deltas must be positive".into());
                }
                if self.n.iter().any(|&n| n < 2) {
                    return cfg("delta_moments needs n >= 2".into());
                }
            }
            ExperimentKind::Spacing => {
                if let Some(f) = self.extra.bulk_fraction {
                    if !(f > 0.0 && f < 1.0) {
                        return cfg(format!("bulk_fraction = {f} must lie in (0, 1)"));
                    }
                }
            }
            _ => {}
        }
        if let Some(s) = self.extra.eta_prime {
            if !(s.coefficient() > 0.0) {
                return cfg("eta_prime must be positive".into());
            }
        }
        Ok(())
    }
}

/// One aggregated estimate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultRow {
    pub n: usize,
    pub energy: f64,
    pub eta: f64,
    pub mean: f64,
    /// Sample standard deviation over `sqrt(samples)`; NaN for a single sample.
    pub stderr: f64,
    pub samples: usize,
    /// Closed-form reference, NaN where none exists.
    pub reference: f64,
    /// Kind-specific ratio (see each experiment), NaN where undefined.
    pub ratio: f64,
    /// Which statistic the row holds (schedule label for sweeps).
    pub series: String,
    /// Largest single-sample value.
    pub sample_max: f64,
}

impl ResultRow {
    fn from_values(n: usize, energy: f64, eta: f64, series: impl Into<String>, values: &[f64]) -> Self {
        let m = SampleMoments::from_values(values);
        Self {
            n,
            energy,
            eta,
            mean: m.mean,
            stderr: m.std_err,
            samples: m.count,
            reference: f64::NAN,
            ratio: f64::NAN,
            series: series.into(),
            sample_max: m.max,
        }
    }

    fn reference(mut self, r: f64) -> Self {
        self.reference = r;
        self
    }

    fn ratio(mut self, r: f64) -> Self {
        self.ratio = r;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentResult {
    pub spec: ExperimentSpec,
    pub rows: Vec<ResultRow>,
    pub warnings: Vec<String>,
    pub wall_time_s: f64,
    pub version: String,
}

/// Executes experiments on a dedicated worker pool.
pub struct Runner {
    pool: rayon::ThreadPool,
}

impl Runner {
    /// `threads = None` lets the pool pick one worker per available core.
    pub fn new(threads: Option<usize>) -> Result<Self> {
        let mut builder = rayon::ThreadPoolBuilder::new();
        if let Some(t) = threads {
            if t == 0 {
                return Err(Error::Config("thread count must be positive".into()));
            }
            builder = builder.num_threads(t);
        }
        let pool = builder.build().map_err(|e| Error::Config(format!("cannot build worker pool: {e}")))?;
        Ok(Self { pool })
    }

    pub fn threads(&self) -> usize {
        self.pool.current_num_threads()
    }

    pub fn run(&self, spec: &ExperimentSpec) -> Result<ExperimentResult> {
        match spec.kind {
            ExperimentKind::Dos => self.averaged_dos(spec),
            ExperimentKind::ImStieltjes => self.expected_im_stieltjes(spec),
            ExperimentKind::Wegner => self.wegner_scan(spec),
            ExperimentKind::Derivative => self.derivative_scan(spec),
            ExperimentKind::ScaleSweep => self.scale_sweep(spec),
            ExperimentKind::DeltaMoments => self.delta_moments(spec),
            ExperimentKind::Spacing => self.spacing(spec),
        }
    }

    /// Per-sample statistic vectors for size `n`, in sample order.
    fn per_sample<F>(&self, spec: &ExperimentSpec, n: usize, f: F) -> Result<Vec<Vec<f64>>>
    where
        F: Fn(&Spectrum) -> Result<Vec<f64>> + Sync,
    {
        self.per_matrix(spec, n, |ens, seed| f(&eigvalsh(&ens.sample(seed))?))
    }

    fn per_matrix<F>(&self, spec: &ExperimentSpec, n: usize, f: F) -> Result<Vec<Vec<f64>>>
    where
        F: Fn(&WignerEnsemble, SeedSpec) -> Result<Vec<f64>> + Sync,
    {
        let ensemble = WignerEnsemble::new(n, &spec.dist.off, &spec.dist.diag)?;
        let master = derive_seed(spec.seed, n as u64);
        self.pool.install(|| {
            (0..spec.samples as u64)
                .into_par_iter()
                .map(|i| f(&ensemble, SeedSpec::new(master, i)))
                .collect::<Result<Vec<_>>>()
        })
    }

    /// Assembles the result; rows whose eta column is a spectral scale are
    /// screened for sub-microscopic `N * eta`.
    fn finish(
        &self,
        spec: &ExperimentSpec,
        rows: Vec<ResultRow>,
        mut warnings: Vec<String>,
        start: Instant,
    ) -> ExperimentResult {
        let eta_is_scale = !matches!(spec.kind, ExperimentKind::DeltaMoments | ExperimentKind::Spacing);
        for r in rows.iter().filter(|_| eta_is_scale) {
            if (r.n as f64) * r.eta < SUB_MICROSCOPIC_THRESHOLD {
                let w = format!(
                    "sub-microscopic scale N*eta = {:.3e} at N = {}, eta = {:.3e} ({}): heavy-tailed estimator, per-sample maximum {:.6e}",
                    r.n as f64 * r.eta,
                    r.n,
                    r.eta,
                    r.series,
                    r.sample_max
                );
                if !warnings.contains(&w) {
                    warnings.push(w);
                }
            }
        }
        ExperimentResult {
            spec: spec.clone(),
            rows,
            warnings,
            wall_time_s: start.elapsed().as_secs_f64(),
            version: env!("CARGO_PKG_VERSION").to_string(),
        }
    }

    fn expect_kind(spec: &ExperimentSpec, kind: ExperimentKind) -> Result<()> {
        spec.validate()?;
        if spec.kind != kind {
            return Err(Error::Config(format!("expected a {} spec, got {}", kind.name(), spec.kind.name())));
        }
        Ok(())
    }

    /// `E N[E - eta/2; E + eta/2] / (N eta)` per `(N, E, eta)`; reference `rho_sc(E)`,
    /// ratio `mean / reference`. With `extra.eta_prime`, adds `arctan_window` rows
    /// holding `(1/pi)` times the window average of `Im m_N(x + i eta')`.
    pub fn averaged_dos(&self, spec: &ExperimentSpec) -> Result<ExperimentResult> {
        Self::expect_kind(spec, ExperimentKind::Dos)?;
        let start = Instant::now();
        let mut rows = Vec::new();
        for &n in &spec.n {
            let points = grid(spec, n);
            let eta_prime = spec.extra.eta_prime.map(|s| s.at(n));
            let per = self.per_sample(spec, n, |s| {
                let mut out = Vec::with_capacity(points.len() * 2);
                for &(e, eta) in &points {
                    out.push(dos_value(s, e, eta)?);
                    if let Some(ep) = eta_prime {
                        out.push(window_averaged_im_stieltjes(s, e, eta, ep)? / std::f64::consts::PI);
                    }
                }
                Ok(out)
            })?;
            let stride = if eta_prime.is_some() { 2 } else { 1 };
            for (k, &(e, eta)) in points.iter().enumerate() {
                let reference = rho_sc(e);
                let row = ResultRow::from_values(n, e, eta, "dos", &column(&per, k * stride));
                rows.push(row.clone().reference(reference).ratio(row.mean / reference));
                if eta_prime.is_some() {
                    let row = ResultRow::from_values(n, e, eta, "arctan_window", &column(&per, k * stride + 1));
                    rows.push(row.clone().reference(reference).ratio(row.mean / reference));
                }
            }
        }
        Ok(self.finish(spec, rows, Vec::new(), start))
    }

    /// `E Im m_N(E + i eta)`; reference `pi rho_sc(E)`, ratio `mean / reference`.
    pub fn expected_im_stieltjes(&self, spec: &ExperimentSpec) -> Result<ExperimentResult> {
        Self::expect_kind(spec, ExperimentKind::ImStieltjes)?;
        let start = Instant::now();
        let mut rows = Vec::new();
        let mut warnings = Vec::new();
        for &n in &spec.n {
            let points = grid(spec, n);
            for &(e, eta) in &points {
                let reference = std::f64::consts::PI * rho_sc(e);
                let predicted = predicted_im_stieltjes_stderr(reference, n, eta, spec.samples);
                if predicted > STDERR_WARNING_FRACTION * reference {
                    warnings.push(format!(
                        "predicted standard error {predicted:.3e} exceeds {:.0}% of the reference {reference:.4} at N = {n}, E = {e}, eta = {eta:.3e}",
                        STDERR_WARNING_FRACTION * 100.0
                    ));
                }
            }
            let per = self.per_sample(spec, n, |s| {
                points.iter().map(|&(e, eta)| im_stieltjes(s, ComplexPoint::new(e, eta))).collect()
            })?;
            for (k, &(e, eta)) in points.iter().enumerate() {
                let reference = std::f64::consts::PI * rho_sc(e);
                let row = ResultRow::from_values(n, e, eta, "im_stieltjes", &column(&per, k));
                rows.push(row.clone().reference(reference).ratio(row.mean / reference));
            }
        }
        Ok(self.finish(spec, rows, warnings, start))
    }

    /// Per `eta`: `E N[E +- eta/2]` (series `count`, reference `N (F_sc(E + eta/2) - F_sc(E - eta/2))`)
    /// and `E N^2[E +- eta/2]` (series `count_sq`). The ratio column is `mean / (N eta)`.
    pub fn wegner_scan(&self, spec: &ExperimentSpec) -> Result<ExperimentResult> {
        Self::expect_kind(spec, ExperimentKind::Wegner)?;
        let start = Instant::now();
        let mut rows = Vec::new();
        for &n in &spec.n {
            let points = grid(spec, n);
            let per = self.per_sample(spec, n, |s| {
                let mut out = Vec::with_capacity(points.len() * 2);
                for &(e, eta) in &points {
                    let c = counting(s, e - 0.5 * eta, e + 0.5 * eta)? as f64;
                    out.push(c);
                    out.push(c * c);
                }
                Ok(out)
            })?;
            for (k, &(e, eta)) in points.iter().enumerate() {
                let scale = n as f64 * eta;
                let expected = n as f64 * (f_sc(e + 0.5 * eta) - f_sc(e - 0.5 * eta));
                let row = ResultRow::from_values(n, e, eta, "count", &column(&per, 2 * k));
                rows.push(row.clone().reference(expected).ratio(row.mean / scale));
                let row = ResultRow::from_values(n, e, eta, "count_sq", &column(&per, 2 * k + 1));
                rows.push(row.clone().ratio(row.mean / scale));
            }
        }
        Ok(self.finish(spec, rows, Vec::new(), start))
    }

    /// Central difference `[Im m_N(E + dE + i eta) - Im m_N(E - dE + i eta)] / (2 dE)`
    /// on the same matrices at both energies. Reference is `pi rho_sc'(E)`;
    /// the ratio column is `|mean| / N`.
    pub fn derivative_scan(&self, spec: &ExperimentSpec) -> Result<ExperimentResult> {
        Self::expect_kind(spec, ExperimentKind::Derivative)?;
        let start = Instant::now();
        let step = spec.extra.delta_e.expect("validated");
        let mut rows = Vec::new();
        let mut warnings = Vec::new();
        for &n in &spec.n {
            let de = step.at(n);
            let points = grid(spec, n);
            for &(_, eta) in &points {
                if eta > 1.0 / n as f64 * (1.0 + 1e-12) {
                    warnings.push(format!("eta = {eta:.3e} exceeds 1/N at N = {n}; the bound concerns eta <= 1/N"));
                }
            }
            let per = self.per_sample(spec, n, |s| {
                points
                    .iter()
                    .map(|&(e, eta)| {
                        let up = im_stieltjes(s, ComplexPoint::new(e + de, eta))?;
                        let down = im_stieltjes(s, ComplexPoint::new(e - de, eta))?;
                        Ok((up - down) / (2.0 * de))
                    })
                    .collect()
            })?;
            for (k, &(e, eta)) in points.iter().enumerate() {
                let row = ResultRow::from_values(n, e, eta, "derivative", &column(&per, k));
                let ratio = row.mean.abs() / n as f64;
                rows.push(row.reference(semicircle_slope(e)).ratio(ratio));
            }
        }
        Ok(self.finish(spec, rows, warnings, start))
    }

    /// Averaged density of states for every `(N, eta schedule, E)`; the series
    /// column carries the schedule label. Reference `rho_sc(E)`, ratio `mean / reference`.
    pub fn scale_sweep(&self, spec: &ExperimentSpec) -> Result<ExperimentResult> {
        Self::expect_kind(spec, ExperimentKind::ScaleSweep)?;
        let start = Instant::now();
        let mut rows = Vec::new();
        for &n in &spec.n {
            let per = self.per_sample(spec, n, |s| {
                let mut out = Vec::with_capacity(spec.eta.len() * spec.energy.len());
                for sched in &spec.eta {
                    for &e in &spec.energy {
                        out.push(dos_value(s, e, sched.at(n))?);
                    }
                }
                Ok(out)
            })?;
            let mut k = 0;
            for sched in &spec.eta {
                for &e in &spec.energy {
                    let reference = rho_sc(e);
                    let row = ResultRow::from_values(n, e, sched.at(n), sched.label(), &column(&per, k));
                    rows.push(row.clone().reference(reference).ratio(row.mean / reference));
                    k += 1;
                }
            }
        }
        Ok(self.finish(spec, rows, Vec::new(), start))
    }

    /// Statistics of the minor `B` (row/column 0 removed) per `(N, E)`:
    ///
    /// - `omega_delta^k`: `E 1(Omega) Delta^k` (eta column `eps/N`);
    /// - `omega_delta^k_nb2(d)`: `E 1(Omega) Delta^k N_B[E +- d/N]^2` (eta column `d/N`);
    /// - `p_beta0(d)`: `P(N |lambda_beta0 - E| <= d)`, ratio `mean / d`;
    /// - `median_delta`: median of `Delta` over good-event samples.
    pub fn delta_moments(&self, spec: &ExperimentSpec) -> Result<ExperimentResult> {
        Self::expect_kind(spec, ExperimentKind::DeltaMoments)?;
        let start = Instant::now();
        let eps = spec.extra.eps.unwrap_or(1.0);
        let moments = if spec.extra.moments.is_empty() { vec![0, 1, 2] } else { spec.extra.moments.clone() };
        let deltas = if spec.extra.deltas.is_empty() { vec![0.5, 0.1, 0.02] } else { spec.extra.deltas.clone() };
        let mut rows = Vec::new();
        let mut warnings = Vec::new();
        for &n in &spec.n {
            let nf = n as f64;
            // Per energy: [omega, delta (NaN off Omega), nearest distance * N, N_B counts per d].
            let width = 3 + deltas.len();
            let per = self.per_matrix(spec, n, |ens, seed| {
                let h = ens.sample(seed);
                let minor = eigvalsh(&h.minor(0)?)?;
                let lambda = minor.eigenvalues();
                let mut out = Vec::with_capacity(width * spec.energy.len());
                for &e in &spec.energy {
                    let omega = good_event(lambda, e, eps, n);
                    let delta = if omega {
                        select_indices(lambda, e, eps, n).map(|s| s.delta).unwrap_or(f64::NAN)
                    } else {
                        f64::NAN
                    };
                    let nearest = lambda.iter().map(|&l| (l - e).abs()).fold(f64::INFINITY, f64::min);
                    out.push(if delta.is_nan() { 0.0 } else { 1.0 });
                    out.push(delta);
                    out.push(nf * nearest);
                    for &d in &deltas {
                        out.push(counting(&minor, e - d / nf, e + d / nf)? as f64);
                    }
                }
                Ok(out)
            })?;
            for (ei, &e) in spec.energy.iter().enumerate() {
                let base = ei * width;
                let omega = column(&per, base);
                let delta = column(&per, base + 1);
                let nearest = column(&per, base + 2);
                let omega_freq = omega.iter().sum::<f64>() / omega.len() as f64;
                if omega_freq < 1.0 {
                    warnings.push(format!(
                        "good event failed in {:.4}% of samples at N = {n}, E = {e}",
                        100.0 * (1.0 - omega_freq)
                    ));
                }
                let good_delta: Vec<f64> = delta.iter().copied().filter(|d| d.is_finite()).collect();
                for &k in &moments {
                    let vals: Vec<f64> =
                        delta.iter().map(|&d| if d.is_finite() { d.powi(k as i32) } else { 0.0 }).collect();
                    rows.push(ResultRow::from_values(n, e, eps / nf, format!("omega_delta^{k}"), &vals));
                    for (di, &d) in deltas.iter().enumerate() {
                        let counts = column(&per, base + 3 + di);
                        let vals: Vec<f64> = delta
                            .iter()
                            .zip(&counts)
                            .map(|(&dl, &c)| if dl.is_finite() { dl.powi(k as i32) * c * c } else { 0.0 })
                            .collect();
                        rows.push(ResultRow::from_values(n, e, d / nf, format!("omega_delta^{k}_nb2({d})"), &vals));
                    }
                }
                for &d in &deltas {
                    let hits: Vec<f64> = nearest.iter().map(|&x| if x <= d { 1.0 } else { 0.0 }).collect();
                    let row = ResultRow::from_values(n, e, d / nf, format!("p_beta0({d})"), &hits);
                    let ratio = row.mean / d;
                    rows.push(row.ratio(ratio));
                }
                let mut row = ResultRow::from_values(n, e, eps / nf, "median_delta", &good_delta);
                row.mean = median(&good_delta);
                row.stderr = f64::NAN;
                rows.push(row);
            }
        }
        Ok(self.finish(spec, rows, warnings, start))
    }

    /// Unfolded spacings pooled over samples in the central `bulk_fraction`
    /// of the semicircle mass. Series: `mean_spacing` (reference 1),
    /// `ks_surmise` (KS distance to the GUE Wigner surmise), and
    /// `fraction_below_0.1` (reference: surmise mass below 0.1).
    /// The energy column is the window centre and the eta column its width.
    pub fn spacing(&self, spec: &ExperimentSpec) -> Result<ExperimentResult> {
        Self::expect_kind(spec, ExperimentKind::Spacing)?;
        let start = Instant::now();
        let window = central_window(spec.extra.bulk_fraction.unwrap_or(0.5))?;
        let mut rows = Vec::new();
        for &n in &spec.n {
            let per = self.per_sample(spec, n, |s| Ok(unfolded_spacings(s, window)?.spacings))?;
            let pooled: Vec<f64> = per.into_iter().flatten().collect();
            let (centre, width) = (0.5 * (window.0 + window.1), window.1 - window.0);
            if pooled.is_empty() {
                return Err(Error::Numeric(format!("no spacings collected at N = {n}")));
            }
            let row = ResultRow::from_values(n, centre, width, "mean_spacing", &pooled);
            let ratio = row.mean;
            rows.push(row.reference(1.0).ratio(ratio));
            let ks = ks_distance(&pooled, wigner_surmise_gue_cdf)?;
            let mut row = ResultRow::from_values(n, centre, width, "ks_surmise", &[ks]);
            row.samples = pooled.len();
            rows.push(row);
            let below: Vec<f64> = pooled.iter().map(|&s| if s < 0.1 { 1.0 } else { 0.0 }).collect();
            let reference = wigner_surmise_gue_cdf(0.1);
            let row = ResultRow::from_values(n, centre, width, "fraction_below_0.1", &below);
            let ratio = row.mean / reference;
            rows.push(row.reference(reference).ratio(ratio));
        }
        Ok(self.finish(spec, rows, Vec::new(), start))
    }
}

/// `(E, eta(N))` pairs, energy-major.
fn grid(spec: &ExperimentSpec, n: usize) -> Vec<(f64, f64)> {
    spec.energy.iter().flat_map(|&e| spec.eta.iter().map(move |s| (e, s.at(n)))).collect()
}

fn column(per: &[Vec<f64>], k: usize) -> Vec<f64> {
    per.iter().map(|v| v[k]).collect()
}

fn dos_value(s: &Spectrum, e: f64, eta: f64) -> Result<f64> {
    Ok(counting(s, e - 0.5 * eta, e + 0.5 * eta)? as f64 / (s.n() as f64 * eta))
}

/// `d/dE (pi rho_sc(E)) = -E / (2 sqrt(4 - E^2))` inside the bulk.
pub fn semicircle_slope(e: f64) -> f64 {
    if e.abs() < 2.0 {
        // Adding 0.0 maps -0 to +0 at E = 0.
        -e / (2.0 * (4.0 - e * e).sqrt()) + 0.0
    } else {
        f64::NAN
    }
}

/// Heuristic standard error of the `Im m_N` mean: `sqrt(pi rho / (M N eta)) / sqrt(N eta)`.
pub fn predicted_im_stieltjes_stderr(pi_rho: f64, n: usize, eta: f64, samples: usize) -> f64 {
    let neta = n as f64 * eta;
    (pi_rho / (samples as f64 * neta)).sqrt() / neta.sqrt()
}

/// Window average of the semicircle density, `(F_sc(E + eta/2) - F_sc(E - eta/2)) / eta`.
pub fn semicircle_window_average(e: f64, eta: f64) -> f64 {
    (f_sc(e + 0.5 * eta) - f_sc(e - 0.5 * eta)) / eta
}

/// Runs `spec` on a fresh pool with the given worker count.
pub fn run_experiment(spec: &ExperimentSpec, threads: Option<usize>) -> Result<ExperimentResult> {
    Runner::new(threads)?.run(spec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::m_sc;

    fn runner() -> Runner {
        Runner::new(Some(2)).unwrap()
    }

    fn dos_spec(n: usize, samples: usize, eta: Scale) -> ExperimentSpec {
        ExperimentSpec::new(ExperimentKind::Dos, &[n], samples, 42).with_eta(&[eta])
    }

    #[test]
    fn spec_json_accepts_scalars_and_lists() {
        let spec = ExperimentSpec::from_json(
            r#"{"kind": "dos", "n": 64, "samples": 10, "energy": 0.25, "eta": {"over_n": 2.0}, "seed": 7}"#,
        )
        .unwrap();
        assert_eq!(spec.n, vec![64]);
        assert_eq!(spec.energy, vec![0.25]);
        assert_eq!(spec.eta, vec![Scale::OverN(2.0)]);
        assert_eq!(spec.kappa, DEFAULT_KAPPA);
        let text = serde_json::to_string(&spec).unwrap();
        assert_eq!(ExperimentSpec::from_json(&text).unwrap(), spec);
        let spec = ExperimentSpec::from_json(
            r#"{"kind": "scale_sweep", "n": [64, 128], "samples": 3, "eta": [{"absolute": 0.5}, {"over_n_3_2": 0.05}], "seed": 1,
                "dist": {"off": {"kind": "smoothed_uniform", "params": [0.3], "role": "off_diagonal"},
                         "diag": {"kind": "gaussian", "role": "diagonal"}}}"#,
        )
        .unwrap();
        assert_eq!(spec.eta[1].at(100), 0.05 / 1000.0);
    }

    #[test]
    fn invalid_specs_are_configuration_errors() {
        let bad = [
            r#"{"kind": "dos", "n": 64, "samples": 0, "eta": {"absolute": 0.5}, "seed": 1}"#,
            r#"{"kind": "dos", "n": 64, "samples": 5, "eta": {"absolute": -0.5}, "seed": 1}"#,
            r#"{"kind": "dos", "n": 64, "samples": 5, "eta": {"absolute": 0.0}, "seed": 1}"#,
            r#"{"kind": "dos", "n": 64, "samples": 5, "seed": 1}"#,
            r#"{"kind": "dos", "n": 64, "samples": 5, "energy": 1.7, "eta": {"absolute": 0.5}, "seed": 1}"#,
            r#"{"kind": "derivative", "n": 64, "samples": 5, "eta": {"over_n": 0.5}, "seed": 1}"#,
            r#"{"kind": "derivative", "n": 64, "samples": 5, "eta": {"over_n": 0.5}, "seed": 1, "extra": {"delta_e": {"over_n": 0.0}}}"#,
            r#"{"kind": "dos", "n": 0, "samples": 5, "eta": {"absolute": 0.5}, "seed": 1}"#,
            r#"{"kind": "dos", "n": 8, "samples": 5, "eta": {"absolute": 0.5}, "seed": 1, "bogus": 3}"#,
        ];
        for text in bad {
            assert!(matches!(ExperimentSpec::from_json(text), Err(Error::Config(_))), "{text}");
        }
        let spec = dos_spec(8, 3, Scale::Absolute(0.5));
        let mut wrong = spec.clone();
        wrong.kind = ExperimentKind::Wegner;
        assert!(matches!(runner().averaged_dos(&wrong), Err(Error::Config(_))));
    }

    #[test]
    fn macroscopic_dos_matches_window_reference() {
        let res = runner().run(&dos_spec(64, 500, Scale::Absolute(0.5))).unwrap();
        assert_eq!(res.rows.len(), 1);
        let row = &res.rows[0];
        assert_eq!(row.samples, 500);
        assert!((row.reference - 1.0 / std::f64::consts::PI).abs() < 1e-15);
        assert!((row.mean - 0.3150).abs() < 0.01, "mean {}", row.mean);
        assert!((row.mean - semicircle_window_average(0.0, 0.5)).abs() < 0.01);
    }

    #[test]
    fn results_do_not_depend_on_thread_count() {
        let spec = dos_spec(32, 40, Scale::OverN(2.0)).with_eta(&[
            Scale::Absolute(0.5),
            Scale::OverN(4.0),
            Scale::OverN(0.5),
            Scale::OverN(0.02),
        ]);
        let a = run_experiment(&spec, Some(1)).unwrap();
        let b = run_experiment(&spec, Some(3)).unwrap();
        let c = run_experiment(&spec, Some(1)).unwrap();
        assert_eq!(a.rows, b.rows);
        assert_eq!(a.rows, c.rows);
        assert_eq!(a.warnings, b.warnings);
        assert!(a.warnings.iter().any(|w| w.contains("sub-microscopic")));
    }

    #[test]
    fn far_field_im_stieltjes() {
        let spec = ExperimentSpec::new(ExperimentKind::ImStieltjes, &[64], 100, 5)
            .with_energy(&[0.0, 1.0])
            .with_eta(&[Scale::Absolute(10.0)]);
        let res = runner().run(&spec).unwrap();
        for row in &res.rows {
            let exact = m_sc(ComplexPoint::new(row.energy, 10.0)).unwrap().im;
            assert!((row.mean / exact - 1.0).abs() < 0.02);
            assert!((row.reference - std::f64::consts::PI * rho_sc(row.energy)).abs() < 1e-15);
        }
        assert!(res.warnings.is_empty());
    }

    #[test]
    fn im_stieltjes_warns_on_noisy_settings() {
        let spec = ExperimentSpec::new(ExperimentKind::ImStieltjes, &[16], 4, 5).with_eta(&[Scale::OverN(0.01)]);
        let res = runner().run(&spec).unwrap();
        assert!(res.warnings.iter().any(|w| w.contains("predicted standard error")));
    }

    #[test]
    fn wegner_whole_bulk_and_single_sample() {
        let spec = ExperimentSpec::new(ExperimentKind::Wegner, &[64], 50, 9).with_eta(&[Scale::Absolute(4.0)]);
        let res = runner().run(&spec).unwrap();
        let count = &res.rows[0];
        assert_eq!(count.series, "count");
        // Every eigenvalue of a 64x64 sample lies in [-2, 2] up to fluctuations.
        let expected = (f_sc(2.0) - f_sc(-2.0)) / 4.0;
        assert!((count.ratio - expected).abs() < 0.01, "{}", count.ratio);
        assert!((count.reference - 64.0).abs() < 1e-12);
        let single = ExperimentSpec { samples: 1, ..spec };
        let res = runner().run(&single).unwrap();
        for row in &res.rows {
            assert!(row.stderr.is_nan());
            assert_eq!(row.mean, row.sample_max);
            assert_eq!(row.samples, 1);
        }
    }

    #[test]
    fn derivative_uses_common_random_numbers() {
        let mut spec = ExperimentSpec::new(ExperimentKind::Derivative, &[32], 200, 3).with_eta(&[Scale::OverN(0.5)]);
        spec.extra.delta_e = Some(Scale::OverN(0.1));
        let a = runner().run(&spec).unwrap();
        let b = runner().run(&spec).unwrap();
        assert_eq!(a.rows, b.rows);
        let row = &a.rows[0];
        assert!(row.mean.abs() <= 3.0 * row.stderr, "{} +- {}", row.mean, row.stderr);
        assert_eq!(row.reference, 0.0);
        assert_eq!(row.ratio, row.mean.abs() / 32.0);
    }

    #[test]
    fn scale_sweep_labels_schedules() {
        let spec = ExperimentSpec::new(ExperimentKind::ScaleSweep, &[16, 32], 20, 4).with_eta(&[
            Scale::Absolute(0.5),
            Scale::OverN(10.0),
            Scale::OverN32(0.05),
        ]);
        let res = runner().run(&spec).unwrap();
        assert_eq!(res.rows.len(), 6);
        let labels: Vec<&str> = res.rows.iter().take(3).map(|r| r.series.as_str()).collect();
        assert_eq!(labels, ["0.5", "10/N", "0.05/N^1.5"]);
        assert!((res.rows[5].eta - 0.05 / 32f64.powf(1.5)).abs() < 1e-18);
        assert!(res.warnings.iter().any(|w| w.contains("0.05/N^1.5")));
    }

    #[test]
    fn delta_moment_rows() {
        let mut spec = ExperimentSpec::new(ExperimentKind::DeltaMoments, &[64], 200, 8);
        spec.extra.moments = vec![0, 2];
        let res = runner().run(&spec).unwrap();
        let omega = res.rows.iter().find(|r| r.series == "omega_delta^0").unwrap();
        assert!(omega.mean >= 0.999);
        let p = res.rows.iter().find(|r| r.series == "p_beta0(0.5)").unwrap();
        assert!(p.mean > 0.0 && p.mean < 1.0);
        assert_eq!(p.ratio, p.mean / 0.5);
        let median_row = res.rows.iter().find(|r| r.series == "median_delta").unwrap();
        assert!(median_row.mean > 1.0 && median_row.mean < 30.0);
        assert!(res.rows.iter().any(|r| r.series == "omega_delta^2_nb2(0.1)"));
    }

    #[test]
    fn spacing_rows() {
        let spec = ExperimentSpec::new(ExperimentKind::Spacing, &[64], 30, 2);
        let res = runner().run(&spec).unwrap();
        let series: Vec<&str> = res.rows.iter().map(|r| r.series.as_str()).collect();
        assert_eq!(series, ["mean_spacing", "ks_surmise", "fraction_below_0.1"]);
        assert!((res.rows[0].mean - 1.0).abs() < 0.1);
        assert!(res.rows[1].mean < 0.1);
    }

    #[test]
    fn arctan_window_brackets_dos() {
        let mut spec = dos_spec(64, 100, Scale::Absolute(0.4));
        let eta_prime = 1e-4;
        spec.extra.eta_prime = Some(Scale::Absolute(eta_prime));
        let res = runner().run(&spec).unwrap();
        let dos = &res.rows[0];
        let smooth = &res.rows[1];
        assert_eq!(smooth.series, "arctan_window");
        let bound = eta_prime.sqrt() / 0.4;
        assert!((std::f64::consts::PI * (dos.mean - smooth.mean)).abs() <= bound, "{} vs {}", dos.mean, smooth.mean);
    }

    #[test]
    fn doubling_samples_shrinks_stderr() {
        let small = runner().run(&dos_spec(32, 400, Scale::OverN(4.0))).unwrap();
        let large = runner().run(&dos_spec(32, 800, Scale::OverN(4.0))).unwrap();
        let ratio = small.rows[0].stderr / large.rows[0].stderr;
        assert!((ratio / 2f64.sqrt() - 1.0).abs() < 0.15, "ratio {ratio}");
    }
}
