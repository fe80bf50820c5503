//! The `stodet` command line.
//!
//! ```text
//! stodet estimate    --estimator <name> (--matrix <path> | --ensemble <kind> ...) [--samples N] [--seed S] [--streams K]
//! stodet convergence --estimator <name> (--matrix <path> | --ensemble <kind> ...) --out <csv> [--trace-stride K]
//! stodet validate    [--seed S]
//! ```
//!
//! Exit codes: 0 success, 1 validation failure, 2 I/O or parse failure,
//! 3 singular matrix or numerical failure, 64 usage error.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};

use crate::ensembles::{generate, EnsembleSpec};
use crate::estimators::{
    det_via_inverse_solves, inv_det_gaussian_ratio, inv_det_importance, inv_det_sphere,
    EstimateResult, EstimatorConfig, IsotropicGaussianPair,
};
use crate::linalg::{format_f64, lu_factorize, parse_matrix, DenseMatrix};
use crate::sampling::{DirectionSampler, UniformSphere};
use crate::validate::Validator;
use crate::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_IO: i32 = 2;
pub const EXIT_SINGULAR: i32 = 3;
pub const EXIT_USAGE: i32 = 64;

pub const CSV_HEADER: &str = "sample_index,running_log_estimate,running_estimate,oracle_log_abs_det";

#[derive(Debug, Parser)]
#[command(name = "stodet", version, about = "Monte Carlo determinant estimation from matrix-vector products")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one estimator and print a summary against the LU reference.
    Estimate(RunArgs),
    /// Write the running estimate as CSV.
    Convergence(RunArgs),
    /// Run the built-in property suite.
    Validate(ValidateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EstimatorKind {
    #[value(name = "sphere_invdet")]
    SphereInvDet,
    #[value(name = "inverse_solve_det")]
    InverseSolveDet,
    #[value(name = "gaussian_ratio_invdet")]
    GaussianRatioInvDet,
    #[value(name = "importance_invdet")]
    ImportanceInvDet,
}

impl EstimatorKind {
    pub fn name(self) -> &'static str {
        match self {
            EstimatorKind::SphereInvDet => "sphere_invdet",
            EstimatorKind::InverseSolveDet => "inverse_solve_det",
            EstimatorKind::GaussianRatioInvDet => "gaussian_ratio_invdet",
            EstimatorKind::ImportanceInvDet => "importance_invdet",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum EnsembleArg {
    #[value(name = "gaussian_iid")]
    GaussianIid,
    #[value(name = "orthogonal")]
    Orthogonal,
    #[value(name = "scaled_identity")]
    ScaledIdentity,
    #[value(name = "diagonal")]
    Diagonal,
    #[value(name = "ill_conditioned")]
    IllConditioned,
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("source").required(true).args(["matrix", "ensemble"])))]
struct RunArgs {
    #[arg(long, value_enum, default_value = "inverse_solve_det")]
    estimator: EstimatorKind,
    /// Matrix file: first line n, then n rows of n numbers.
    #[arg(long)]
    matrix: Option<PathBuf>,
    #[arg(long, value_enum)]
    ensemble: Option<EnsembleArg>,
    #[arg(long)]
    n: Option<usize>,
    /// Scale c for scaled_identity.
    #[arg(long)]
    scale: Option<f64>,
    /// Condition number for ill_conditioned.
    #[arg(long)]
    cond: Option<f64>,
    /// Comma-separated entries for diagonal.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    diag: Option<Vec<f64>>,
    #[arg(long, default_value_t = 10_000)]
    samples: u64,
    /// Seed for sampling, and for the ensemble unless --matrix-seed is given.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    matrix_seed: Option<u64>,
    #[arg(long, default_value_t = 1)]
    streams: usize,
    #[arg(long)]
    trace_stride: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Standard deviation of the proposal q = N(0, σ²I) for importance_invdet.
    #[arg(long, default_value_t = 1.0)]
    q_sigma: f64,
}

#[derive(Debug, Args)]
struct ValidateArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum MatrixSource {
    File(PathBuf),
    Ensemble(EnsembleSpec),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunCommand {
    Estimate,
    Convergence,
}

/// A fully validated `estimate` or `convergence` request.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSpec {
    pub command: RunCommand,
    pub estimator: EstimatorKind,
    pub matrix_source: MatrixSource,
    pub samples: u64,
    pub seed: u64,
    pub streams: usize,
    pub trace_stride: u64,
    pub output_path: Option<PathBuf>,
    pub q_sigma: f64,
}

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn usage(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }

    fn io(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_IO,
            message: message.into(),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Parse { .. } => EXIT_IO,
            Error::InvalidConfig(_) | Error::InvalidSpec(_) => EXIT_USAGE,
            Error::InvalidMatrix(_) | Error::DimensionMismatch { .. } => EXIT_USAGE,
            Error::SingularMatrix { .. }
            | Error::SingularDirection { .. }
            | Error::UnsupportedSample { .. }
            | Error::NonFiniteWeight(_)
            | Error::EmptyAccumulator => EXIT_SINGULAR,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

/// Parses `args` (including the program name), runs the command, and returns
/// the process exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let rendered = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(stdout, "{rendered}");
                    EXIT_OK
                }
                _ => {
                    let _ = write!(stderr, "{rendered}");
                    EXIT_USAGE
                }
            };
        }
    };

    let outcome = match cli.command {
        Command::Estimate(args) => {
            build_spec(RunCommand::Estimate, args).and_then(|spec| run_estimate(&spec, stdout))
        }
        Command::Convergence(args) => build_spec(RunCommand::Convergence, args)
            .and_then(|spec| run_convergence(&spec, stdout)),
        Command::Validate(args) => return run_validate(args.seed, &UniformSphere, stdout, stderr),
    };
    match outcome {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(stderr, "error: {}", e.message);
            e.code
        }
    }
}

fn build_spec(command: RunCommand, a: RunArgs) -> Result<RunSpec, CliError> {
    let matrix_source = match (a.matrix, a.ensemble) {
        (Some(path), None) => MatrixSource::File(path),
        (None, Some(kind)) => {
            let seed = a.matrix_seed.unwrap_or(a.seed);
            let need_n = || a.n.ok_or_else(|| CliError::usage("--n is required for this ensemble"));
            let spec = match kind {
                EnsembleArg::GaussianIid => EnsembleSpec::gaussian_iid(need_n()?, seed),
                EnsembleArg::Orthogonal => EnsembleSpec::orthogonal(need_n()?, seed),
                EnsembleArg::ScaledIdentity => {
                    let scale = a
                        .scale
                        .ok_or_else(|| CliError::usage("--scale is required for scaled_identity"))?;
                    EnsembleSpec::scaled_identity(need_n()?, scale)
                }
                EnsembleArg::IllConditioned => {
                    let cond = a
                        .cond
                        .ok_or_else(|| CliError::usage("--cond is required for ill_conditioned"))?;
                    EnsembleSpec::ill_conditioned(need_n()?, cond, seed)
                }
                EnsembleArg::Diagonal => {
                    let entries = a
                        .diag
                        .ok_or_else(|| CliError::usage("--diag is required for diagonal"))?;
                    let mut spec = EnsembleSpec::diagonal(entries);
                    if let Some(n) = a.n {
                        spec.n = n;
                    }
                    spec
                }
            };
            spec.validate()?;
            MatrixSource::Ensemble(spec)
        }
        _ => return Err(CliError::usage("exactly one of --matrix and --ensemble is required")),
    };

    let trace_stride = match command {
        RunCommand::Estimate => 0,
        RunCommand::Convergence => {
            if a.out.is_none() {
                return Err(CliError::usage("convergence requires --out <path>"));
            }
            match a.trace_stride {
                Some(0) => return Err(CliError::usage("--trace-stride must be at least 1")),
                Some(k) => k,
                None => EstimatorConfig::default_trace_stride(a.samples),
            }
        }
    };
    let spec = RunSpec {
        command,
        estimator: a.estimator,
        matrix_source,
        samples: a.samples,
        seed: a.seed,
        streams: a.streams,
        trace_stride,
        output_path: a.out,
        q_sigma: a.q_sigma,
    };
    spec.config().validate()?;
    if spec.estimator == EstimatorKind::ImportanceInvDet {
        IsotropicGaussianPair::new(1.0, spec.q_sigma)?;
    }
    Ok(spec)
}

impl RunSpec {
    pub fn config(&self) -> EstimatorConfig {
        EstimatorConfig::new(self.samples, self.seed)
            .with_streams(self.streams)
            .with_trace_stride(self.trace_stride)
    }

    pub fn load_matrix(&self) -> Result<DenseMatrix, CliError> {
        match &self.matrix_source {
            MatrixSource::File(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| CliError::io(format!("cannot read {}: {e}", path.display())))?;
                parse_matrix(&text).map_err(|e| CliError::io(format!("{}: {e}", path.display())))
            }
            MatrixSource::Ensemble(spec) => Ok(generate(spec)?),
        }
    }
}

/// Runs the requested estimator on `m`.
pub fn estimate(
    kind: EstimatorKind,
    m: &DenseMatrix,
    config: &EstimatorConfig,
    q_sigma: f64,
) -> crate::Result<EstimateResult> {
    match kind {
        EstimatorKind::SphereInvDet => inv_det_sphere(m, config),
        EstimatorKind::InverseSolveDet => det_via_inverse_solves(m, config),
        EstimatorKind::GaussianRatioInvDet => inv_det_gaussian_ratio(m, config),
        EstimatorKind::ImportanceInvDet => {
            inv_det_importance(m, &IsotropicGaussianPair::new(1.0, q_sigma)?, config)
        }
    }
}

struct Run {
    n: usize,
    oracle_log_abs_det: f64,
    result: EstimateResult,
}

fn execute(spec: &RunSpec) -> Result<Run, CliError> {
    let m = spec.load_matrix()?;
    let oracle_log_abs_det = lu_factorize(&m)?.log_abs_det();
    let result = estimate(spec.estimator, &m, &spec.config(), spec.q_sigma)?;
    Ok(Run {
        n: m.dim(),
        oracle_log_abs_det,
        result,
    })
}

fn linear_or_overflow(log_value: f64) -> String {
    let v = log_value.exp();
    if v.is_finite() {
        format_f64(v)
    } else {
        "overflow".to_string()
    }
}

fn write_summary(out: &mut dyn Write, spec: &RunSpec, run: &Run) -> std::io::Result<()> {
    let r = &run.result;
    let expected = r.target.log_value(run.oracle_log_abs_det);
    writeln!(out, "estimator: {}", spec.estimator.name())?;
    writeln!(out, "target: {}", r.target.name())?;
    writeln!(out, "n: {}", run.n)?;
    writeln!(out, "samples: {}", r.n_samples)?;
    writeln!(out, "streams: {}", spec.streams)?;
    writeln!(out, "seed: {}", spec.seed)?;
    writeln!(out, "log_estimate: {}", format_f64(r.log_mean))?;
    writeln!(out, "estimate: {}", linear_or_overflow(r.log_mean))?;
    writeln!(out, "std_error: {}", format_f64(r.std_error))?;
    writeln!(out, "log_std_error: {}", format_f64(r.log_std_error()))?;
    writeln!(out, "oracle_log_abs_det: {}", format_f64(run.oracle_log_abs_det))?;
    writeln!(out, "abs_log_error: {}", format_f64((r.log_mean - expected).abs()))?;
    writeln!(out, "heavy_tail: {}", r.heavy_tail)
}

pub fn run_estimate(spec: &RunSpec, stdout: &mut dyn Write) -> Result<(), CliError> {
    let run = execute(spec)?;
    write_summary(stdout, spec, &run).map_err(|e| CliError::io(format!("stdout: {e}")))
}

/// Renders the convergence trace as CSV.
pub fn convergence_csv(result: &EstimateResult, oracle_log_abs_det: f64) -> String {
    let oracle = format_f64(oracle_log_abs_det);
    let mut csv = String::from(CSV_HEADER);
    csv.push('\n');
    for p in result.trace.iter().flatten() {
        csv.push_str(&format!(
            "{},{},{},{}\n",
            p.sample_index,
            format_f64(p.running_log_mean),
            format_f64(p.running_log_mean.exp()),
            oracle
        ));
    }
    csv
}

pub fn run_convergence(spec: &RunSpec, stdout: &mut dyn Write) -> Result<(), CliError> {
    let path = spec
        .output_path
        .as_ref()
        .ok_or_else(|| CliError::usage("convergence requires --out <path>"))?;
    let run = execute(spec)?;
    let csv = convergence_csv(&run.result, run.oracle_log_abs_det);
    std::fs::write(path, csv).map_err(|e| CliError::io(format!("cannot write {}: {e}", path.display())))?;
    write_summary(stdout, spec, &run)
        .and_then(|_| {
            let rows = run.result.trace.as_ref().map_or(0, Vec::len);
            writeln!(stdout, "trace_rows: {rows}")?;
            writeln!(stdout, "output: {}", path.display())
        })
        .map_err(|e| CliError::io(format!("stdout: {e}")))
}

/// Runs the property suite with the given sphere sampler and prints one line
/// per property. Returns the exit code.
pub fn run_validate(
    seed: u64,
    sampler: &dyn DirectionSampler,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> i32 {
    let outcomes = Validator::new(seed).with_direction_sampler(sampler).run();
    for o in &outcomes {
        let tag = if o.passed { "PASS" } else { "FAIL" };
        let _ = writeln!(stdout, "{tag} {}: {}", o.name, o.detail);
    }
    let failed: Vec<&str> = outcomes.iter().filter(|o| !o.passed).map(|o| o.name).collect();
    if failed.is_empty() {
        let _ = writeln!(stdout, "all {} properties passed", outcomes.len());
        EXIT_OK
    } else {
        let _ = writeln!(stderr, "validation failed: {}", failed.join(", "));
        EXIT_VALIDATION
    }
}
