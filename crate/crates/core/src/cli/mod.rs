//! The `kanfoil` command line: `prep → train → prune → symbolify → report`
//! plus `evaluate`, `importance` and `formula` utilities.
//!
//! Settings come from defaults, then an optional JSON config file, then the
//! `KANFOIL_SEED` environment variable, then flags. The resolved settings are
//! written as `run.json` next to every command's outputs.

mod commands;
mod config;
mod report;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

pub use commands::{
    cmd_prune, cmd_symbolify, load_prepared, prepare, train_kan_model, Prepared, PruneSummary,
    SavedModel, Skeleton, SplitMetrics, SymbolifySummary,
};
pub use config::{KanSettings, LrSettings, PruneSettings, RunConfig, SymbolicSettings, SEED_ENV};
pub use report::{
    build_report, ComparisonReport, MetricsFile, ReportRow, RowSource, LITERATURE_ROWS,
};

#[derive(Debug, Parser)]
#[command(
    name = "kanfoil",
    version,
    about = "Spline-edge networks for airfoil lift regression"
)]
pub struct Cli {
    /// JSON file with run settings; flags take precedence.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModelKind {
    Kan,
    Lr,
    Mlp,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Kan => "kan",
            ModelKind::Lr => "lr",
            ModelKind::Mlp => "mlp",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OptimizerArg {
    Adam,
    Lbfgs,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Load, deduplicate, split and fit the feature scaler.
    Prep(PrepArgs),
    /// Train one model on prepared splits.
    Train(TrainArgs),
    /// Score a saved model on a CSV file.
    Evaluate(EvaluateArgs),
    /// Score, prune and re-evaluate a trained network.
    Prune(PruneArgs),
    /// Edge, node and input-feature importance of a network.
    Importance(ImportanceArgs),
    /// Replace every active edge with a closed-form function.
    Symbolify(SymbolifyArgs),
    /// Evaluate or render an exported formula.
    #[command(subcommand)]
    Formula(FormulaCommand),
    /// Comparison table from metrics files.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct PrepArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Column mapping as role=header (roles: c1..c8, aoa, cl).
    #[arg(long = "column", value_name = "ROLE=HEADER")]
    pub columns: Vec<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub train_fraction: Option<f64>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long, value_enum)]
    pub model: ModelKind,
    /// Directory written by `prep`.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Network training steps.
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long, value_enum)]
    pub optimizer: Option<OptimizerArg>,
    /// MLP epochs.
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Linear-model features, comma separated (default: correlation filter).
    #[arg(long)]
    pub lr_features: Option<String>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// CSV with raw features and targets.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long = "column", value_name = "ROLE=HEADER")]
    pub columns: Vec<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PruneArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub percentile: Option<f64>,
    #[arg(long)]
    pub sparsify_steps: Option<usize>,
    #[arg(long)]
    pub finetune_steps: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct ImportanceArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SymbolifyArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Candidate functions, comma separated (default: full library).
    #[arg(long)]
    pub library: Option<String>,
    #[arg(long)]
    pub precision: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum FormulaCommand {
    /// Evaluate at a point given as a JSON object of variable values.
    Eval {
        #[arg(long)]
        file: PathBuf,
        #[arg(long)]
        at: String,
    },
    /// Print the formula as text or LaTeX.
    Render {
        #[arg(long)]
        file: PathBuf,
        #[arg(long, default_value_t = 2)]
        precision: usize,
        #[arg(long)]
        latex: bool,
    },
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[arg(long, num_args = 0..)]
    pub metrics: Vec<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Parses `args` and runs the command; returns the process exit code
/// (0 success, 1 runtime error, 2 usage error).
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match commands::dispatch(cli) {
        Ok(()) => 0,
        Err(e) if e.downcast_ref::<commands::UsageError>().is_some() => {
            eprintln!("error: {e:#}");
            2
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            1
        }
    }
}
