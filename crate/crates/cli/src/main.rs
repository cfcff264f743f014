use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;

use reachzono::reach::DEFAULT_CEILING;

/// Zonotope reachability analysis for ReLU networks.
#[derive(Debug, Parser)]
#[command(name = "reachzono", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Certify robustness of each anchor's prediction.
    Verify(VerifyArgs),
    /// Robust / non-robust fractions per (true class, other class).
    ClassMatrix(VerifyArgs),
    /// Rank input features by the output volume they produce.
    Rank(RankArgs),
    /// Per-output extents of the reachable set.
    Extents(VerifyArgs),
    /// True-above and false-above rates over a threshold grid.
    Reliability(ReliabilityArgs),
    /// Sample the reachable set by forward passes.
    Sample(SampleArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SetKind {
    Cube,
    Box,
    Free,
    BoxPca,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Over,
    Under,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Model JSON file.
    #[arg(long)]
    model: PathBuf,
    /// CSV dataset; every row is an anchor unless --point is given.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Single anchor, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    point: Option<Vec<f64>>,
    #[arg(long, value_enum, default_value_t = SetKind::Cube)]
    set: SetKind,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    /// Per-feature radii for --set box, comma separated.
    #[arg(long, value_delimiter = ',')]
    radii: Option<Vec<f64>>,
    /// Quadrant pieces allowed per zonotope and layer.
    #[arg(long)]
    max_amp: Option<usize>,
    /// Zonotopes kept after each layer.
    #[arg(long)]
    max_zono: Option<usize>,
    /// Hard limit on zonotopes a layer may produce.
    #[arg(long, env = "REACHZONO_MAX_ZONOTOPES", default_value_t = DEFAULT_CEILING)]
    max_zonotopes: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Omit timings and write floats with 17 significant digits.
    #[arg(long)]
    deterministic: bool,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, value_enum, default_value_t = ModeArg::Both)]
    mode: ModeArg,
}

#[derive(Debug, Args)]
pub struct RankArgs {
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Args)]
pub struct ReliabilityArgs {
    #[command(flatten)]
    common: Common,
    /// Threshold grid; defaults to the distinct sample scores.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    thetas: Option<Vec<f64>>,
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, default_value_t = 10_000)]
    count: usize,
    #[arg(long, default_value_t = reachzono::oracle::DEFAULT_CORNER_FRACTION)]
    corner_fraction: f64,
    /// Include every sampled output in the report.
    #[arg(long)]
    points: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Verify(a) => commands::verify(a),
        Command::ClassMatrix(a) => commands::class_matrix(a),
        Command::Rank(a) => commands::rank(a),
        Command::Extents(a) => commands::extents(a),
        Command::Reliability(a) => commands::reliability(a),
        Command::Sample(a) => commands::sample(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            if err.downcast_ref::<commands::Usage>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
