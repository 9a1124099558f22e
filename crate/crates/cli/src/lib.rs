//! The `ifenet` command-line harness.
//!
//! Every command reads its inputs, computes all outputs in memory and only
//! then writes them (see [`output::Outputs`]). Data files carry no
//! timestamps, so reruns with the same seed are byte-identical.

pub mod commands;
pub mod dataset;
pub mod output;
pub mod report;
pub mod tables;

use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use ifenet::model::Architecture;
use ifenet::train::TrainConfig;

use crate::tables::Format;

#[derive(Debug, Parser)]
#[command(name = "ifenet", version, about = "Iterative feature exclusion experiments on tabular data")]
pub struct Cli {
    /// More log output on stderr (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Clean, one-hot encode and split a raw CSV file.
    Prep(PrepArgs),
    /// Train IFENet (or the plain network with --ablation) on a prepared dataset.
    Train(TrainArgs),
    /// Feature ranking from a trained checkpoint.
    Rank(RankArgs),
    /// NDCG@K of a ranking file against a truth file.
    EvalRanking(EvalRankingArgs),
    /// Test accuracy as a function of the amplification coefficient r.
    SweepR(SweepArgs),
    /// Random hyperparameter search.
    Tune(TuneArgs),
    /// Synthetic data with a planted importance order.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
pub struct PrepArgs {
    /// Raw CSV file with a header row.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub label_col: String,
    #[arg(long)]
    pub out: PathBuf,
    /// Train/val/test fractions (`0.7,0.15,0.15`) or row counts (`781,66,196`).
    #[arg(long, default_value = "0.7,0.15,0.15")]
    pub split: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Columns to discard before cleaning, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub drop_cols: Vec<String>,
    /// Columns to treat as categorical even if every value is numeric.
    #[arg(long, value_delimiter = ',')]
    pub categorical: Vec<String>,
    #[arg(long)]
    pub no_stratify: bool,
    #[arg(long, default_value_t = ',')]
    pub delimiter: char,
}

/// Training hyperparameters shared by `train`, `sweep-r` and `tune`.
#[derive(Debug, Clone, Default, Args)]
pub struct TrainFlags {
    /// Start from a saved config: a report.json, best_config.json or bare
    /// training config. Flags given explicitly override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub hidden: Option<usize>,
    #[arg(long)]
    pub r: Option<f64>,
    /// Maximum epochs [default: 120].
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Epochs without validation improvement before stopping [default: 10].
    #[arg(long)]
    pub patience: Option<usize>,
    /// Train the plain network without the exclusion module.
    #[arg(long)]
    pub ablation: bool,
}

impl TrainFlags {
    pub fn resolve(&self) -> Result<TrainConfig> {
        let mut cfg = match &self.config {
            Some(path) => report::read_train_config(path)?,
            None => TrainConfig::default(),
        };
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = self.lr {
            cfg.learning_rate = v;
        }
        if let Some(v) = self.batch_size {
            cfg.batch_size = v;
        }
        if let Some(v) = self.hidden {
            cfg.hidden = Some(v);
        }
        if let Some(v) = self.r {
            cfg.r = v;
        }
        if let Some(v) = self.epochs {
            cfg.max_epochs = v;
        }
        if let Some(v) = self.patience {
            cfg.patience = v;
        }
        if self.ablation {
            cfg.arch = Architecture::Fnn;
        }
        cfg.validate().context("invalid training configuration")?;
        Ok(cfg)
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Prepared dataset directory (from `prep` or `synth`).
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub train: TrainFlags,
    /// Shuffles per feature for the permutation-importance oracle.
    #[arg(long, default_value_t = 10)]
    pub repeats: usize,
    /// Format of history.{csv,json}.
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct RankArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Prepared dataset directory.
    #[arg(long)]
    pub data: PathBuf,
    /// Which split to score.
    #[arg(long, default_value = "train")]
    pub split: String,
    #[arg(long)]
    pub out: PathBuf,
    /// Also write the per-instance score matrix.
    #[arg(long)]
    pub per_instance: bool,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct EvalRankingArgs {
    /// Ranking file written by `rank` (.csv or .json).
    #[arg(long)]
    pub ranking: PathBuf,
    /// Truth file: groups separated by `;`, tied features by `,`.
    #[arg(long)]
    pub truth: PathBuf,
    /// K values, e.g. `1,3,5` or `1..10` [default: 1..d].
    #[arg(long)]
    pub k_list: Option<String>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Amplification values to train with.
    #[arg(long, default_value = "1,2,3,4,5,6,7,8")]
    pub r_list: String,
    #[command(flatten)]
    pub train: TrainFlags,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct TuneArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 50)]
    pub trials: usize,
    /// Fixed settings for every trial; the searched ones are resampled.
    #[command(flatten)]
    pub train: TrainFlags,
    #[arg(long, default_value_t = 10)]
    pub repeats: usize,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 1000)]
    pub n: usize,
    #[arg(long, default_value_t = 10)]
    pub d: usize,
    /// Number of informative features.
    #[arg(long, default_value_t = 3)]
    pub k: usize,
    #[arg(long, default_value_t = 0.1)]
    pub noise: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "0.7,0.15,0.15")]
    pub split: String,
    #[arg(long)]
    pub out: PathBuf,
}

/// Worker threads for trial-parallel commands: `IFE_THREADS` or all cores.
pub fn threads() -> usize {
    std::env::var("IFE_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&n| n >= 1)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

pub fn run(cli: Cli) -> Result<Vec<PathBuf>> {
    match cli.command {
        Command::Prep(a) => commands::prep(&a),
        Command::Train(a) => commands::train(&a),
        Command::Rank(a) => commands::rank(&a),
        Command::EvalRanking(a) => commands::eval_ranking(&a),
        Command::SweepR(a) => commands::sweep_r(&a),
        Command::Tune(a) => commands::tune(&a),
        Command::Synth(a) => commands::synth(&a),
    }
}
