//! Command-line front end for wignerlab.
//!
//! Exit codes: 0 on success, 1 on numeric failure (or a failing `check`),
//! 2 on usage errors.

pub mod plot;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use wignerlab::diagnostics::diagnose;
use wignerlab::ensembles::{
    regularity_integrals, sample_wigner, DistributionKind, DistributionSpec, EntryRole, SeedSpec,
};
use wignerlab::harness::{ExperimentKind, ExperimentResult, ExperimentSpec, Runner, Scale};
use wignerlab::output::{to_csv_string, to_json_string};
use wignerlab::selfcheck::run_all;
use wignerlab::Error;

/// Environment variable capping the worker pool.
pub const THREADS_ENV: &str = "WIGNERLAB_THREADS";

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "wignerlab", version, about = "Monte Carlo laboratory for Hermitian Wigner matrices")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Averaged density of states N[E - eta/2; E + eta/2] / (N eta).
    Dos(ExperimentArgs),
    /// Expected imaginary part of the Stieltjes transform.
    Stieltjes(ExperimentArgs),
    /// Wegner scan: first and second moments of the eigenvalue count.
    Wegner(ExperimentArgs),
    /// Energy derivative of E Im m_N with common random numbers.
    Deriv(ExperimentArgs),
    /// Averaged density of states across eta schedules and sizes.
    Sweep(ExperimentArgs),
    /// Unfolded spacing statistics against the GUE Wigner surmise.
    Spacing(ExperimentArgs),
    /// Moments of Delta and nearest-eigenvalue probabilities of the minor.
    Moments(ExperimentArgs),
    /// Minor/overlap diagnostics of a single sampled matrix (JSON).
    Diagnostics(DiagnosticsArgs),
    /// Regularity integrals of an entry density.
    Regularity(RegularityArgs),
    /// Run the built-in verification suite.
    Check,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DistArg {
    Gaussian,
    GaussianMixture,
    SmoothedUniform,
}

impl DistArg {
    fn kind(self) -> DistributionKind {
        match self {
            DistArg::Gaussian => DistributionKind::Gaussian,
            DistArg::GaussianMixture => DistributionKind::GaussianMixture,
            DistArg::SmoothedUniform => DistributionKind::SmoothedUniform,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Default)]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    /// JSON experiment spec; inline flags override its fields.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    /// Matrix sizes (comma separated).
    #[arg(long, value_delimiter = ',')]
    pub n: Vec<usize>,
    #[arg(long)]
    pub samples: Option<usize>,
    /// Energies (comma separated).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub energy: Vec<f64>,
    /// Absolute scales eta (comma separated).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub eta: Vec<f64>,
    /// Scales K/N, given as K (comma separated).
    #[arg(long = "eta-over-n", value_delimiter = ',', allow_hyphen_values = true)]
    pub eta_over_n: Vec<f64>,
    /// Scales c/N^(3/2), given as c (comma separated).
    #[arg(long = "eta-over-n32", value_delimiter = ',', allow_hyphen_values = true)]
    pub eta_over_n32: Vec<f64>,
    /// Entry law for both diagonal and off-diagonal entries.
    #[arg(long, value_enum)]
    pub dist: Option<DistArg>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Distance kept from the spectral edges: energies must satisfy |E| < 2 - kappa.
    #[arg(long, allow_hyphen_values = true)]
    pub kappa: Option<f64>,
    /// Finite-difference half-step K/N for `deriv`, given as K.
    #[arg(long = "delta-e-over-n", allow_hyphen_values = true)]
    pub delta_e_over_n: Option<f64>,
    /// Good-event eps for `moments`.
    #[arg(long, allow_hyphen_values = true)]
    pub eps: Option<f64>,
    /// Moment orders for `moments`.
    #[arg(long, value_delimiter = ',')]
    pub moments: Vec<u32>,
    /// Rescaled radii for `moments`.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub deltas: Vec<f64>,
    /// Central fraction of the semicircle mass for `spacing`.
    #[arg(long = "bulk-fraction", allow_hyphen_values = true)]
    pub bulk_fraction: Option<f64>,
    /// Smoothing scale K/N of the arctangent window average for `dos`, given as K.
    #[arg(long = "eta-prime-over-n", allow_hyphen_values = true)]
    pub eta_prime_over_n: Option<f64>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct OutputArgs {
    /// Output file (stdout when omitted).
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// Also write an SVG plot next to --out (same stem, .svg extension).
    #[arg(long)]
    pub plot: bool,
}

#[derive(Debug, Args)]
pub struct DiagnosticsArgs {
    #[arg(long, default_value_t = 64)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Removed row/column (0-based).
    #[arg(long, default_value_t = 0)]
    pub j: usize,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub energy: f64,
    #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
    pub eps: f64,
    #[arg(long, value_enum, default_value_t = DistArg::Gaussian)]
    pub dist: DistArg,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RegularityArgs {
    #[arg(long, value_enum, default_value_t = DistArg::Gaussian)]
    pub dist: DistArg,
    /// Entry role whose normalisation is used.
    #[arg(long, value_enum, default_value_t = RoleArg::OffDiagonal)]
    pub role: RoleArg,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RoleArg {
    OffDiagonal,
    Diagonal,
}

impl From<RoleArg> for EntryRole {
    fn from(r: RoleArg) -> Self {
        match r {
            RoleArg::OffDiagonal => EntryRole::OffDiagonal,
            RoleArg::Diagonal => EntryRole::Diagonal,
        }
    }
}

/// Failure of a CLI run, carrying its exit code.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn usage(message: impl Into<String>) -> Self {
        Self { code: EXIT_USAGE, message: message.into() }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Config(_) | Error::Domain(_) | Error::Precondition(_) => EXIT_USAGE,
            _ => EXIT_FAILURE,
        };
        Self { code, message: e.to_string() }
    }
}

/// Reads the worker cap from [`THREADS_ENV`].
pub fn threads_from_env() -> Result<Option<usize>, CliError> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(t) if t > 0 => Ok(Some(t)),
            _ => Err(CliError::usage(format!("{THREADS_ENV} must be a positive integer, got {v:?}"))),
        },
        Err(_) => Ok(None),
    }
}

/// Builds the experiment spec for `kind` from an optional spec file and flags.
pub fn build_spec(kind: ExperimentKind, args: &ExperimentArgs) -> Result<ExperimentSpec, CliError> {
    let mut spec = match &args.spec {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| CliError::usage(format!("cannot read spec {}: {e}", path.display())))?;
            let spec: ExperimentSpec = serde_json::from_str(&text)
                .map_err(|e| CliError::usage(format!("invalid spec {}: {e}", path.display())))?;
            if spec.kind != kind {
                return Err(CliError::usage(format!(
                    "spec {} describes a {} experiment, not {}",
                    path.display(),
                    spec.kind.name(),
                    kind.name()
                )));
            }
            spec
        }
        None => {
            if args.n.is_empty() || args.samples.is_none() {
                return Err(CliError::usage("--n and --samples are required without --spec"));
            }
            ExperimentSpec::new(kind, &args.n, 1, 0)
        }
    };
    if !args.n.is_empty() {
        spec.n = args.n.clone();
    }
    if let Some(m) = args.samples {
        spec.samples = m;
    }
    if !args.energy.is_empty() {
        spec.energy = args.energy.clone();
    }
    let mut eta: Vec<Scale> = args.eta.iter().map(|&v| Scale::Absolute(v)).collect();
    eta.extend(args.eta_over_n.iter().map(|&v| Scale::OverN(v)));
    eta.extend(args.eta_over_n32.iter().map(|&v| Scale::OverN32(v)));
    if !eta.is_empty() {
        spec.eta = eta;
    }
    if let Some(d) = args.dist {
        spec.dist.off = DistributionSpec::default_of_kind(d.kind(), EntryRole::OffDiagonal);
        spec.dist.diag = DistributionSpec::default_of_kind(d.kind(), EntryRole::Diagonal);
    }
    if let Some(s) = args.seed {
        spec.seed = s;
    }
    if let Some(k) = args.kappa {
        spec.kappa = k;
    }
    if let Some(d) = args.delta_e_over_n {
        spec.extra.delta_e = Some(Scale::OverN(d));
    }
    if let Some(e) = args.eps {
        spec.extra.eps = Some(e);
    }
    if !args.moments.is_empty() {
        spec.extra.moments = args.moments.clone();
    }
    if !args.deltas.is_empty() {
        spec.extra.deltas = args.deltas.clone();
    }
    if let Some(f) = args.bulk_fraction {
        spec.extra.bulk_fraction = Some(f);
    }
    if let Some(k) = args.eta_prime_over_n {
        spec.extra.eta_prime = Some(Scale::OverN(k));
    }
    spec.validate()?;
    Ok(spec)
}

fn write_output(out: Option<&Path>, text: &str) -> Result<(), CliError> {
    match out {
        Some(path) => fs::write(path, text)
            .map_err(|e| CliError { code: EXIT_FAILURE, message: format!("cannot write {}: {e}", path.display()) }),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes()).map_err(|e| CliError { code: EXIT_FAILURE, message: e.to_string() })
        }
    }
}

fn emit_result(result: &ExperimentResult, output: &OutputArgs) -> Result<(), CliError> {
    let text = match output.format {
        Format::Csv => to_csv_string(&result.rows)?,
        Format::Json => to_json_string(result)? + "\n",
    };
    write_output(output.out.as_deref(), &text)?;
    if output.plot {
        let out = output.out.as_ref().ok_or_else(|| CliError::usage("--plot needs --out"))?;
        let svg = out.with_extension("svg");
        if svg == *out {
            return Err(CliError::usage("--plot needs an --out path without an .svg extension"));
        }
        plot::emit_plot(result, &svg)?;
    }
    for w in &result.warnings {
        eprintln!("warning: {w}");
    }
    Ok(())
}

fn run_experiment(kind: ExperimentKind, args: &ExperimentArgs) -> Result<(), CliError> {
    let spec = build_spec(kind, args)?;
    if args.output.plot && args.output.out.is_none() {
        return Err(CliError::usage("--plot needs --out"));
    }
    let runner = Runner::new(threads_from_env()?)?;
    let result = runner.run(&spec)?;
    emit_result(&result, &args.output)
}

fn run_diagnostics(args: &DiagnosticsArgs) -> Result<(), CliError> {
    let off = DistributionSpec::default_of_kind(args.dist.kind(), EntryRole::OffDiagonal);
    let diag = DistributionSpec::default_of_kind(args.dist.kind(), EntryRole::Diagonal);
    let h = sample_wigner(args.n, &off, &diag, SeedSpec::new(args.seed, 0))?;
    let d = diagnose(&h, args.j, args.energy, args.eps)?;
    let text = serde_json::to_string_pretty(&d).map_err(Error::from)? + "\n";
    write_output(args.out.as_deref(), &text)
}

fn run_regularity(args: &RegularityArgs) -> Result<(), CliError> {
    let spec = DistributionSpec::default_of_kind(args.dist.kind(), args.role.into());
    let r = regularity_integrals(&spec)?;
    let text = match args.format {
        Format::Csv => format!("I6={}\nI4={}\nI2pp={}\n", r.i6, r.i4, r.i2pp),
        Format::Json => serde_json::to_string_pretty(&r).map_err(Error::from)? + "\n",
    };
    write_output(None, &text)
}

fn run_check() -> Result<i32, CliError> {
    let outcomes = run_all();
    let mut failed = 0;
    for o in &outcomes {
        let status = if o.passed { "PASS" } else { "FAIL" };
        println!("{status}  {}  residual={:.3e}  tolerance={:.1e}", o.name, o.residual, o.tolerance);
        failed += usize::from(!o.passed);
    }
    println!("{} checks, {} failed", outcomes.len(), failed);
    Ok(if failed == 0 { EXIT_OK } else { EXIT_FAILURE })
}

/// Executes a parsed command line and returns the exit code.
pub fn run(cli: Cli) -> Result<i32, CliError> {
    let kind = match &cli.command {
        Command::Dos(a) => Some((ExperimentKind::Dos, a)),
        Command::Stieltjes(a) => Some((ExperimentKind::ImStieltjes, a)),
        Command::Wegner(a) => Some((ExperimentKind::Wegner, a)),
        Command::Deriv(a) => Some((ExperimentKind::Derivative, a)),
        Command::Sweep(a) => Some((ExperimentKind::ScaleSweep, a)),
        Command::Spacing(a) => Some((ExperimentKind::Spacing, a)),
        Command::Moments(a) => Some((ExperimentKind::DeltaMoments, a)),
        _ => None,
    };
    if let Some((kind, args)) = kind {
        run_experiment(kind, args)?;
        return Ok(EXIT_OK);
    }
    match &cli.command {
        Command::Diagnostics(a) => run_diagnostics(a)?,
        Command::Regularity(a) => run_regularity(a)?,
        Command::Check => return run_check(),
        _ => unreachable!("experiment commands handled above"),
    }
    Ok(EXIT_OK)
}

/// Parses `std::env::args`, runs, and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {}", e.message);
            e.code
        }
    }
}
