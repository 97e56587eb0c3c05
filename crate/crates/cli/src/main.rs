use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use mpl_core::harness::{self, error_kind, ExperimentConfig, Mode};

#[derive(Parser)]
#[command(name = "mpl", version, about = "Momentum pseudo-labeling experiments for CTC models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic corpus file.
    GenData(RunArgs),
    /// Train the supervised base model.
    TrainBase(RunArgs),
    /// Momentum pseudo-labeling from a base model.
    TrainMpl(RunArgs),
    /// Momentum pseudo-labeling on unlabeled data only.
    TrainMplUnsup(RunArgs),
    /// Standard pseudo-labeling with labels fixed by the base model.
    TrainPl(RunArgs),
    /// Iterative pseudo-labeling.
    TrainIpl(RunArgs),
    /// Supervised training on all labels (unlabeled labels revealed).
    TrainTopline(RunArgs),
    /// Score a checkpoint or a hypotheses file.
    Evaluate(RunArgs),
    /// One MPL run per momentum weight.
    SweepW(RunArgs),
    /// Print the default config as JSON.
    DefaultConfig,
}

#[derive(Args)]
struct RunArgs {
    /// JSON experiment config; unspecified fields keep their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override a config field, e.g. `--set train.epochs=5`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Force the deterministic flag on.
    #[arg(long)]
    deterministic: bool,
}

impl RunArgs {
    fn build(&self, mode: Mode) -> anyhow::Result<ExperimentConfig> {
        let mut config = match &self.config {
            Some(path) => ExperimentConfig::load(path).with_context(|| format!("loading {}", path.display()))?,
            None => ExperimentConfig::default(),
        };
        config.mode = mode;
        for assignment in &self.overrides {
            config.apply_override(assignment)?;
        }
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        if let Some(out) = &self.out {
            config.out_dir = out.clone();
        }
        if self.deterministic {
            config.deterministic = true;
        }
        Ok(config)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (mode, args) = match &cli.command {
        Command::GenData(a) => (Mode::GenData, a),
        Command::TrainBase(a) => (Mode::TrainBase, a),
        Command::TrainMpl(a) => (Mode::TrainMpl, a),
        Command::TrainMplUnsup(a) => (Mode::TrainMplUnsup, a),
        Command::TrainPl(a) => (Mode::TrainPl, a),
        Command::TrainIpl(a) => (Mode::TrainIpl, a),
        Command::TrainTopline(a) => (Mode::TrainTopline, a),
        Command::Evaluate(a) => (Mode::Evaluate, a),
        Command::SweepW(a) => (Mode::SweepW, a),
        Command::DefaultConfig => {
            return match ExperimentConfig::default().to_json() {
                Ok(json) => {
                    println!("{json}");
                    ExitCode::SUCCESS
                }
                Err(e) => report(&e.to_string(), "json"),
            };
        }
    };
    let config = match args.build(mode) {
        Ok(c) => c,
        Err(e) => {
            let kind = e.downcast_ref::<mpl_core::Error>().map_or("config", error_kind);
            return report(&format!("{e:#}"), kind);
        }
    };
    match harness::run(&config) {
        Ok(summary) => match serde_json::to_string_pretty(&summary) {
            Ok(json) => {
                println!("{json}");
                ExitCode::SUCCESS
            }
            Err(e) => report(&e.to_string(), "json"),
        },
        Err(e) => report(&e.to_string(), error_kind(&e)),
    }
}

/// Prints a one-line JSON error report to stderr.
fn report(detail: &str, kind: &str) -> ExitCode {
    let report = serde_json::json!({ "error": kind, "detail": detail });
    eprintln!("{report}");
    ExitCode::FAILURE
}
