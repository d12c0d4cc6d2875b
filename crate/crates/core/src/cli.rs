//! `speccomp` command-line front end.
//!
//! Standard output carries only `key=value` lines; diagnostics go to
//! standard error. Exit codes: 0 success, 1 runtime error, 2 no
//! convergence, 64 usage error.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::completion::{complete, CompletionConfig, CompletionNorm};
use crate::constraint::Constraint;
use crate::error::{Error, Result};
use crate::io::{self, MaskedMatrixFile, MatrixFormat};
use crate::matrix::{apply_mask, norm, DenseMatrix};
use crate::solver::{masked_error, solve_with_observer, SolverConfig, StepMode};

pub const EXIT_OK: i32 = 0;
pub const EXIT_RUNTIME: i32 = 1;
pub const EXIT_NOT_CONVERGED: i32 = 2;
pub const EXIT_USAGE: i32 = 64;

#[derive(Debug, Parser)]
#[command(name = "speccomp", version, about = "Masked matrix approximation and completion under spectral constraints")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Approximate the observed entries under a constraint.
    Approx(ApproxArgs),
    /// Complete missing entries by minimizing a spectral norm.
    Complete(CompleteArgs),
    /// Remove random square blocks from a matrix or image.
    Corrupt(CorruptArgs),
    /// Write the singular values of a matrix.
    Spectrum(SpectrumArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    Csv,
    Pgm,
}

impl From<FormatArg> for MatrixFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Csv => MatrixFormat::Csv,
            FormatArg::Pgm => MatrixFormat::Pgm,
        }
    }
}

#[derive(Debug, Args)]
pub struct InputArgs {
    /// Input matrix (CSV with empty/NaN holes, or PGM).
    #[arg(long)]
    pub input: PathBuf,
    /// Optional mask file of observed "i,j" pairs, intersected with the
    /// entries present in the input.
    #[arg(long)]
    pub mask: Option<PathBuf>,
    /// Input format; PGM is detected by its magic number otherwise.
    #[arg(long, value_enum)]
    pub format: Option<FormatArg>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ConstraintKind {
    Frobenius,
    Spectral,
    Nuclear,
    Kyfan,
    Rank,
    Orthonormal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StepArg {
    Fixed,
    Armijo,
}

#[derive(Debug, Args)]
pub struct ApproxArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Output path; a .pgm extension writes an image, anything else CSV.
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long, value_enum)]
    pub constraint: ConstraintKind,
    /// Radius for the ball constraints.
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Order for kyfan and rank.
    #[arg(long)]
    pub k: Option<usize>,
    /// Absolute masked-error threshold [default: 1e-6 * max(1, |P M|_F)].
    #[arg(long)]
    pub tol: Option<f64>,
    /// Stagnation threshold on the change of the masked error.
    #[arg(long, default_value_t = 1e-10)]
    pub rel_tol: f64,
    #[arg(long, default_value_t = 5000)]
    pub max_iters: usize,
    #[arg(long, value_enum, default_value_t = StepArg::Fixed)]
    pub step: StepArg,
    /// Fixed step size.
    #[arg(long, default_value_t = 1.0)]
    pub mu: f64,
    /// Armijo sufficient-decrease constant.
    #[arg(long, default_value_t = 0.1)]
    pub armijo_sigma: f64,
    /// Armijo initial step.
    #[arg(long, default_value_t = 1.0)]
    pub mu_tilde: f64,
    #[arg(long, default_value_t = 30)]
    pub max_halvings: usize,
    /// Log the masked error of every iterate to standard error.
    #[arg(long)]
    pub verbose: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum NormArg {
    Nuclear,
    Spectral,
    Kyfan,
}

#[derive(Debug, Args)]
pub struct CompleteArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long, value_enum, default_value_t = NormArg::Nuclear)]
    pub norm: NormArg,
    /// Ky-Fan order.
    #[arg(long)]
    pub k: Option<usize>,
    /// Admissible masked error.
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    /// Admissible width of the final radius bracket.
    #[arg(long, default_value_t = 1e-6)]
    pub lambda_tol: f64,
    #[arg(long, default_value_t = 60)]
    pub max_bisections: usize,
    /// Inner solver iteration budget per radius.
    #[arg(long, default_value_t = 5000)]
    pub max_iters: usize,
    /// Inner solver stagnation threshold.
    #[arg(long, default_value_t = 1e-10)]
    pub rel_tol: f64,
    /// Log every bisection step to standard error.
    #[arg(long)]
    pub verbose: bool,
}

#[derive(Debug, Args)]
pub struct CorruptArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Output path. CSV outputs leave holes as empty fields; PGM outputs are
    /// zero-filled and come with a mask file.
    #[arg(long)]
    pub output: PathBuf,
    /// Mask file for image outputs [default: <output>.mask.csv].
    #[arg(long)]
    pub mask_output: Option<PathBuf>,
    /// Side length of the removed squares.
    #[arg(long, default_value_t = 3)]
    pub square: usize,
    /// Target missing fraction, in (0, 1).
    #[arg(long, default_value_t = 0.18)]
    pub fraction: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct SpectrumArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long)]
    pub output: PathBuf,
}

/// Failure of a subcommand, mapped onto an exit code.
#[derive(Debug)]
enum Failure {
    Usage(String),
    Runtime(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Runtime(e)
    }
}

type Outcome = std::result::Result<i32, Failure>;

/// Parses `args` (including the program name) and runs the subcommand.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let rendered = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{rendered}");
                    EXIT_OK
                }
                _ => {
                    let _ = write!(err, "{rendered}");
                    EXIT_USAGE
                }
            };
        }
    };
    let outcome = match &cli.command {
        Command::Approx(a) => run_approx(a, out, err),
        Command::Complete(a) => run_complete(a, out, err),
        Command::Corrupt(a) => run_corrupt(a, out, err),
        Command::Spectrum(a) => run_spectrum(a, out),
    };
    match outcome {
        Ok(code) => code,
        Err(Failure::Usage(msg)) => {
            let _ = writeln!(err, "error: {msg}\n\nFor more information, try '--help'.");
            EXIT_USAGE
        }
        Err(Failure::Runtime(e)) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_RUNTIME
        }
    }
}

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

fn load(input: &InputArgs) -> Result<MaskedMatrixFile> {
    let mut file = io::read_input(&input.input, input.format.map(Into::into))?;
    if let Some(mask) = &input.mask {
        let extra = io::read_mask_csv(mask, file.matrix.rows(), file.matrix.cols())?;
        file.omega = file.omega.intersection(&extra)?;
    }
    file.matrix = apply_mask(&file.matrix, &file.omega)?;
    Ok(file)
}

fn is_pgm_path(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("pgm"))
}

fn save(path: &Path, m: &DenseMatrix) -> Result<()> {
    if is_pgm_path(path) {
        io::write_pgm(path, m, true)
    } else {
        io::write_matrix_csv(path, m)
    }
}

fn positive(name: &str, v: f64) -> std::result::Result<f64, Failure> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(usage(format!("--{name} must be positive, got {v}")))
    }
}

fn constraint_from(a: &ApproxArgs) -> std::result::Result<Constraint, Failure> {
    let lambda = || {
        a.lambda
            .ok_or_else(|| usage("this constraint needs --lambda"))
            .and_then(|v| positive("lambda", v))
    };
    let k = || match a.k {
        Some(k) if k >= 1 => Ok(k),
        Some(_) => Err(usage("--k must be at least 1")),
        None => Err(usage("this constraint needs --k")),
    };
    Ok(match a.constraint {
        ConstraintKind::Frobenius => Constraint::FrobeniusBall { lambda: lambda()? },
        ConstraintKind::Spectral => Constraint::SpectralBall { lambda: lambda()? },
        ConstraintKind::Nuclear => Constraint::NuclearBall { lambda: lambda()? },
        ConstraintKind::Kyfan => Constraint::KyFanBall {
            k: k()?,
            lambda: lambda()?,
        },
        ConstraintKind::Rank => Constraint::RankAtMost { k: k()? },
        ConstraintKind::Orthonormal => Constraint::Orthonormal,
    })
}

fn run_approx(a: &ApproxArgs, out: &mut dyn Write, err: &mut dyn Write) -> Outcome {
    let constraint = constraint_from(a)?;
    let step_mode = match a.step {
        StepArg::Fixed => StepMode::Fixed { mu: a.mu },
        StepArg::Armijo => StepMode::Armijo {
            sigma: a.armijo_sigma,
            mu_tilde: a.mu_tilde,
            max_halvings: a.max_halvings,
        },
    };
    let cfg = SolverConfig {
        step_mode,
        tol: a.tol,
        rel_tol: a.rel_tol,
        max_iters: a.max_iters,
    };
    cfg.validate().map_err(|e| usage(e.to_string()))?;

    let file = load(&a.input)?;
    constraint
        .validate(file.matrix.rows(), file.matrix.cols())
        .map_err(|e| usage(e.to_string()))?;
    let verbose = a.verbose;
    let sol = solve_with_observer(&file.matrix, &file.omega, &constraint, &cfg, &file.matrix, |n, e| {
        if verbose {
            let _ = writeln!(err, "iter={n} error={e:e}");
        }
    })?;
    save(&a.output, &sol.x)?;

    let report = [
        ("constraint", constraint.to_string()),
        ("initial_error", sol.trace.errors[0].to_string()),
        ("error", sol.trace.final_error().to_string()),
        ("iterations", sol.trace.iterations.to_string()),
        ("measure", constraint.measure(&sol.x)?.to_string()),
        ("converged", sol.trace.converged.to_string()),
    ];
    write_report(out, &report)?;
    Ok(if sol.trace.converged { EXIT_OK } else { EXIT_NOT_CONVERGED })
}

fn run_complete(a: &CompleteArgs, out: &mut dyn Write, err: &mut dyn Write) -> Outcome {
    let norm_choice = match (a.norm, a.k) {
        (NormArg::Nuclear, _) => CompletionNorm::Nuclear,
        (NormArg::Spectral, _) => CompletionNorm::Spectral,
        (NormArg::Kyfan, Some(k)) if k >= 1 => CompletionNorm::KyFan(k),
        (NormArg::Kyfan, _) => return Err(usage("--norm kyfan needs --k >= 1")),
    };
    let cfg = CompletionConfig {
        norm: norm_choice,
        tol: a.tol,
        lambda_tol: a.lambda_tol,
        max_bisections: a.max_bisections,
        solver: SolverConfig {
            max_iters: a.max_iters,
            rel_tol: a.rel_tol,
            ..SolverConfig::default()
        },
    };
    cfg.validate().map_err(|e| usage(e.to_string()))?;

    let file = load(&a.input)?;
    norm_choice
        .ball(1.0)
        .validate(file.matrix.rows(), file.matrix.cols())
        .map_err(|e| usage(e.to_string()))?;
    if file.omega.is_full() {
        let _ = writeln!(err, "note: input has no missing entries");
    }
    let res = complete(&file.matrix, &file.omega, &cfg)?;
    if a.verbose {
        for (n, step) in res.bisection_history.iter().enumerate() {
            let _ = writeln!(
                err,
                "bisection={n} lambda={:e} error={:e} inner_iterations={}",
                step.lambda, step.error, step.inner_iterations
            );
        }
    }
    save(&a.output, &res.x)?;

    let kind = norm_choice.norm_kind();
    let report = [
        ("lambda_star", res.lambda_star.to_string()),
        ("lambda_max", res.lambda_max.to_string()),
        ("error", masked_error(&res.x, &file.matrix, &file.omega)?.to_string()),
        ("bisections", res.bisections().to_string()),
        ("norm", norm(&res.x, kind)?.to_string()),
        ("observed_norm", res.lambda_max.to_string()),
        ("converged", res.converged.to_string()),
    ];
    write_report(out, &report)?;
    Ok(if res.converged { EXIT_OK } else { EXIT_NOT_CONVERGED })
}

fn run_corrupt(a: &CorruptArgs, out: &mut dyn Write, _err: &mut dyn Write) -> Outcome {
    if !(a.fraction > 0.0 && a.fraction < 1.0) {
        return Err(usage(format!("--fraction must lie in (0, 1), got {}", a.fraction)));
    }
    if a.square == 0 {
        return Err(usage("--square must be at least 1"));
    }
    let file = load(&a.input)?;
    let (rows, cols) = file.matrix.shape();
    let kept = io::corrupt_squares(rows, cols, a.square, a.fraction, a.seed)?;
    let omega = file.omega.intersection(&kept)?;
    let corrupted = apply_mask(&file.matrix, &omega)?;

    if is_pgm_path(&a.output) {
        io::write_pgm(&a.output, &corrupted, true)?;
        let mask_path = a.mask_output.clone().unwrap_or_else(|| {
            let mut p = a.output.clone().into_os_string();
            p.push(".mask.csv");
            PathBuf::from(p)
        });
        io::write_mask_csv(&mask_path, &omega)?;
    } else {
        io::write_masked_matrix_csv(&a.output, &corrupted, &omega)?;
    }

    let report = [
        ("fraction", kept.missing_fraction().to_string()),
        ("missing", (rows * cols - omega.len()).to_string()),
        ("observed", omega.len().to_string()),
    ];
    write_report(out, &report)?;
    Ok(EXIT_OK)
}

fn run_spectrum(a: &SpectrumArgs, out: &mut dyn Write) -> Outcome {
    let file = load(&a.input)?;
    io::write_spectrum_csv(&a.output, &file.matrix)?;
    let values = file.matrix.rows().min(file.matrix.cols());
    write_report(out, &[("values", values.to_string())])?;
    Ok(EXIT_OK)
}

fn write_report(out: &mut dyn Write, pairs: &[(&str, String)]) -> Result<()> {
    for (key, value) in pairs {
        writeln!(out, "{key}={value}").map_err(|source| Error::Io {
            path: PathBuf::from("<stdout>"),
            source,
        })?;
    }
    Ok(())
}
