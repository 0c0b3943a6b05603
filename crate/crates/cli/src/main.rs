//! Batch front end for weighted least-squares branch length estimation.
//!
//! Three subcommands cover the library's surface: `estimate` fits branch
//! lengths on a fixed topology, `check` runs the diagnostic predicates
//! (four-point, semi-multiplicativity, irrelevant-pair coefficients), and
//! `simulate` produces noisy distance data with a known ground truth.
//!
//! The primary artifact of each command goes to stdout; diagnostics and a
//! machine-readable error object (on failure) go to stderr. Exit codes:
//! 0 success, 2 input error, 3 numerical failure, 4 failed check under
//! `--strict`.

mod commands;
mod report;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use wlstrees::io::ParseError;
use wlstrees::WlsError;

#[derive(Parser)]
#[command(
    name = "wlstrees",
    version,
    about = "Weighted least-squares branch lengths for fixed phylogenetic topologies"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate branch lengths from a distance matrix; Newick on stdout.
    Estimate(EstimateArgs),
    /// Run a diagnostic check; JSON report on stdout.
    Check(CheckArgs),
    /// Simulate noisy distances on a tree with known branch lengths.
    Simulate(SimulateArgs),
}

#[derive(Args)]
struct EstimateArgs {
    /// Newick file fixing the topology (input branch lengths are ignored).
    tree: PathBuf,
    /// Distance matrix in relaxed PHYLIP format.
    dist: PathBuf,
    /// Variance model for the distance errors.
    #[arg(long, value_enum, default_value_t = VarianceKind::Ols)]
    variance: VarianceKind,
    #[command(flatten)]
    flags: VarianceFlags,
    /// Also write the JSON run report to this file.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct CheckArgs {
    /// Matrix to check: distances for `fourpoint` or when `--variance`
    /// derives the variances; otherwise read as the variance matrix itself.
    matrix: PathBuf,
    /// Which diagnostic to run.
    #[arg(long, value_enum)]
    mode: CheckMode,
    /// Newick topology (required for `semimult` and `iip`).
    #[arg(long)]
    tree: Option<PathBuf>,
    /// Derive the variances from this model over the input distances
    /// instead of reading the matrix as variances.
    #[arg(long, value_enum)]
    variance: Option<VarianceKind>,
    #[command(flatten)]
    flags: VarianceFlags,
    /// Tolerance; defaults to 1e-9 for `fourpoint` and 1e-10 otherwise.
    #[arg(long)]
    tol: Option<f64>,
    /// Exit with code 4 when the check fails.
    #[arg(long)]
    strict: bool,
    /// Write the JSON report to this file instead of stdout.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    /// Newick file carrying the topology and true branch lengths.
    tree: PathBuf,
    /// Noise model for the pairwise distances.
    #[arg(long, value_enum, default_value_t = SimModel::GaussJc)]
    model: SimModel,
    /// Sequence length behind the `gauss-jc` variances.
    #[arg(long, default_value_t = 1000)]
    seqlen: usize,
    /// Common standard deviation for `gauss-const`.
    #[arg(long, default_value_t = 0.1)]
    sd: f64,
    /// RNG seed; a fixed seed reproduces the output files byte for byte.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Where to write the simulated distance matrix.
    #[arg(long)]
    out_dist: PathBuf,
    /// Where to write the exact variance matrix that generated the noise.
    #[arg(long)]
    out_var: PathBuf,
    /// Write the JSON report to this file instead of stdout.
    #[arg(long)]
    report: Option<PathBuf>,
}

/// Model-specific inputs shared by `estimate` and `check`.
#[derive(Args)]
struct VarianceFlags {
    /// Newick file whose branch lengths are per-edge precision weights for
    /// `mult` (variances multiply 1/w along each path); its topology must
    /// match the main tree.
    #[arg(long)]
    weights: Option<PathBuf>,
    /// Taxon weight table for `taxon`: one `label value` per line.
    #[arg(long)]
    taxa: Option<PathBuf>,
    /// Sequence length for `jc`.
    #[arg(long)]
    seqlen: Option<usize>,
    /// Constant coefficient of the `pauplin` family.
    #[arg(long, default_value_t = 1.0)]
    c1: f64,
    /// Per-edge slope of the `pauplin` family.
    #[arg(long, default_value_t = 1.0)]
    c2: f64,
    /// Explicit variance matrix in PHYLIP format for `file`.
    #[arg(long)]
    var_file: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum VarianceKind {
    /// Unit variances (ordinary least squares).
    Ols,
    /// Balanced minimum evolution: 2^(edges on the leaf-to-leaf path).
    Bme,
    /// Fitch–Margoliash: squared observed distances.
    Fm,
    /// Jukes–Cantor sampling variance at the observed distances.
    Jc,
    /// Products of per-taxon weights (needs --taxa).
    Taxon,
    /// Products of reciprocal per-edge weights along paths (needs --weights).
    Mult,
    /// (c1 + c2 (k - 1)) 2^k over path edge counts k (set --c1/--c2).
    Pauplin,
    /// Explicit matrix from --var-file.
    File,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum CheckMode {
    /// Four-point condition on a dissimilarity matrix.
    Fourpoint,
    /// Semi-multiplicativity of a variance matrix on a tree.
    Semimult,
    /// Irrelevant-pair coefficients of every edge's BLUE.
    Iip,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum SimModel {
    /// Gaussian noise with Jukes–Cantor variances from the true distances.
    GaussJc,
    /// Gaussian noise with one shared standard deviation.
    GaussConst,
}

/// Failures mapped to exit codes and a one-line JSON object on stderr.
#[derive(Debug)]
enum CliError {
    Input(String),
    Numerical(String),
    CheckFailed(String),
}

impl CliError {
    fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::CheckFailed(_) => 4,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            CliError::Input(_) => "input",
            CliError::Numerical(_) => "numerical",
            CliError::CheckFailed(_) => "check-failed",
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Input(m) | CliError::Numerical(m) | CliError::CheckFailed(m) => m,
        }
    }
}

impl From<ParseError> for CliError {
    fn from(err: ParseError) -> Self {
        CliError::Input(err.to_string())
    }
}

impl From<WlsError> for CliError {
    fn from(err: WlsError) -> Self {
        match err {
            WlsError::NumericalFailure { .. } | WlsError::NotMultiplicative(_) => {
                CliError::Numerical(err.to_string())
            }
            other => CliError::Input(other.to_string()),
        }
    }
}

fn init_thread_pool() {
    let Ok(raw) = std::env::var("WLSTREES_THREADS") else {
        return;
    };
    match raw.trim().parse::<usize>() {
        Ok(k) if k > 0 => {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(k).build_global();
        }
        _ => eprintln!("warning: ignoring invalid WLSTREES_THREADS={raw:?}"),
    }
}

fn main() {
    let cli = Cli::parse();
    init_thread_pool();
    let result = match cli.command {
        Command::Estimate(args) => commands::estimate(&args),
        Command::Check(args) => commands::check(&args),
        Command::Simulate(args) => commands::simulate(&args),
    };
    if let Err(err) = result {
        eprintln!("{}", report::error_json(err.kind(), err.exit_code(), err.message()));
        std::process::exit(err.exit_code());
    }
}
