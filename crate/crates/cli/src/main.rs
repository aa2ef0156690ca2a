//! `mdelm`: encode records, train an ELM classifier, score samples for
//! likely mislabels and report the detections.
//!
//! Settings resolve in this order, later wins: built-in defaults, the
//! `--config` JSON file, command-line flags.

mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use commands::{DetectArgs, DetectOverrides, EncodeArgs, ReportArgs, SynthArgs, TrainArgs, TrainOverrides};
use error::CliError;

#[derive(Parser)]
#[command(name = "mdelm", version, about = "Mislabel detection with Extreme Learning Machines")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic blob dataset with hidden label flips.
    Synth(SynthCmd),
    /// Encode raw records into a numeric feature matrix.
    Encode(EncodeCmd),
    /// Train an ELM with an elastic-net readout and select features.
    Train(TrainCmd),
    /// Run the mislabel-detection ensemble.
    Detect(DetectCmd),
    /// Print detections at one quantile and write plot data.
    Report(ReportCmd),
}

#[derive(Args)]
struct SynthCmd {
    #[arg(long, default_value_t = 4)]
    classes: usize,
    #[arg(long, default_value_t = 300)]
    per_class: usize,
    /// Size of the last class, for imbalanced variants.
    #[arg(long)]
    minority: Option<usize>,
    /// Informative dimensions.
    #[arg(long, default_value_t = 20)]
    dim: usize,
    /// Pure-noise columns.
    #[arg(long, default_value_t = 30)]
    noise: usize,
    #[arg(long, default_value_t = mdelm_core::datasets::SynthSpec::DEFAULT_SPREAD)]
    spread: f64,
    /// Fraction of labels flipped.
    #[arg(long, default_value_t = 0.03)]
    flip: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// Also write the dataset with its clean labels.
    #[arg(long)]
    clean_out: Option<PathBuf>,
}

#[derive(Args)]
struct EncodeCmd {
    /// Raw records (.csv, or .jsonl with one object per line).
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
    /// Fitted schema to apply.
    #[arg(long, conflicts_with = "spec")]
    schema: Option<PathBuf>,
    /// Variable specs to fit a schema from.
    #[arg(long)]
    spec: Option<PathBuf>,
    /// Raw column with integer class labels; adds a `label` column.
    #[arg(long)]
    label_column: Option<String>,
    #[arg(long)]
    classes: Option<usize>,
    /// Write the fitted schema next to the output.
    #[arg(long)]
    fit_schema: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TrainCmd {
    /// Encoded dataset with `id` and `label` columns.
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[arg(long)]
    classes: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    n_sigmoid: Option<usize>,
    #[arg(long)]
    n_rbf: Option<usize>,
    #[arg(long)]
    no_passthrough: bool,
    #[arg(long)]
    lambda: Option<f64>,
    /// Comma-separated regularization strengths.
    #[arg(long, value_delimiter = ',')]
    alpha_grid: Option<Vec<f64>>,
    #[arg(long)]
    l1_ratio: Option<f64>,
    #[arg(long)]
    folds: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    /// Uniform sample weights instead of balanced class weights.
    #[arg(long)]
    uniform_weights: bool,
}

#[derive(Args)]
struct DetectCmd {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
    /// `selected_features.json` from `train`; restricts the input columns.
    #[arg(long)]
    selected: Option<PathBuf>,
    /// Ground-truth sidecar from `synth`, for a separation check.
    #[arg(long)]
    truth: Option<PathBuf>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[arg(long)]
    classes: Option<usize>,
    #[arg(long)]
    models: Option<usize>,
    #[arg(long)]
    target_score: Option<f64>,
    #[arg(long)]
    max_iterations: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; results do not depend on it.
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long, conflicts_with = "no_focus")]
    focus_class: Option<usize>,
    /// Propose flips over all classes and keep every sample.
    #[arg(long)]
    no_focus: bool,
    #[arg(long, value_delimiter = ',')]
    quantiles: Option<Vec<f64>>,
    #[arg(long)]
    feature_subset_size: Option<usize>,
}

#[derive(Args)]
struct ReportCmd {
    /// `report.json` from `detect`.
    #[arg(long)]
    scores: PathBuf,
    #[arg(long)]
    quantile: f64,
    /// Plot-data CSV.
    #[arg(long)]
    out: PathBuf,
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Synth(c) => commands::cmd_synth(SynthArgs {
            classes: c.classes,
            per_class: c.per_class,
            minority: c.minority,
            dim: c.dim,
            noise: c.noise,
            spread: c.spread,
            flip: c.flip,
            seed: c.seed,
            out: c.out,
            clean_out: c.clean_out,
        }),
        Command::Encode(c) => commands::cmd_encode(EncodeArgs {
            input: c.input,
            config: c.config,
            schema: c.schema,
            spec: c.spec,
            label_column: c.label_column,
            classes: c.classes,
            fit_schema: c.fit_schema,
            out: c.out,
        }),
        Command::Train(c) => commands::cmd_train(TrainArgs {
            data: c.data,
            config: c.config,
            out_dir: c.out_dir,
            classes: c.classes,
            overrides: TrainOverrides {
                seed: c.seed,
                n_sigmoid: c.n_sigmoid,
                n_rbf: c.n_rbf,
                no_passthrough: c.no_passthrough,
                lambda: c.lambda,
                alpha_grid: c.alpha_grid,
                l1_ratio: c.l1_ratio,
                folds: c.folds,
                epochs: c.epochs,
                uniform_weights: c.uniform_weights,
            },
        }),
        Command::Detect(c) => commands::cmd_detect(DetectArgs {
            data: c.data,
            config: c.config,
            selected: c.selected,
            truth: c.truth,
            out_dir: c.out_dir,
            classes: c.classes,
            overrides: DetectOverrides {
                models: c.models,
                target_score: c.target_score,
                max_iterations: c.max_iterations,
                seed: c.seed,
                jobs: c.jobs,
                focus_class: c.focus_class,
                no_focus: c.no_focus,
                quantiles: c.quantiles,
                feature_subset_size: c.feature_subset_size,
            },
        }),
        Command::Report(c) => commands::cmd_report(ReportArgs {
            scores: c.scores,
            quantile: c.quantile,
            out: c.out,
        }),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .target(env_logger::Target::Stderr)
        .init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            log::error!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
