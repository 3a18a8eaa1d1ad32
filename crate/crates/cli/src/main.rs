//! `afva`: feature extraction, training, cross-validation, analyses and the
//! rating service.

mod commands;
mod config;
mod serve;

use std::path::PathBuf;
use std::process::ExitCode;

use afva_core::ffnn::{TrainConfig, DEFAULT_HIDDEN};
use afva_core::pipeline::FeatureConfig;
use afva_core::{Axis, ObjectSource, Selection};
use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "afva", version, about = "Valence-arousal emotion toolkit for images")]
pub struct Cli {
    /// key=value file supplying defaults for any flag
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Debug, Subcommand)]
pub enum Cmd {
    /// Compute a feature cache for every manifest record.
    Extract(ExtractArgs),
    /// Train a network on a labeled feature cache.
    Train(TrainArgs),
    /// Predict with a trained model on a feature cache.
    Predict(PredictArgs),
    /// Print a model's architecture and metadata.
    Inspect(InspectArgs),
    /// K-fold cross-validation straight from a manifest.
    Cv(CvArgs),
    /// Label analyses.
    #[command(subcommand)]
    Analyze(AnalyzeCmd),
    /// Copy finalized crowd ratings onto a manifest.
    ExportLabels(ExportLabelsArgs),
    /// Run the rating collection service.
    Serve(ServeArgs),
}

#[derive(Debug, Clone, Args)]
pub struct FeatureArgs {
    /// Comma-separated blocks (color,gist,lbp,object,semantic) or "all"
    #[arg(long, default_value = "all")]
    pub blocks: Selection,
    /// Square resolution images are resized to before GIST
    #[arg(long, default_value_t = FeatureConfig::default().gist_resolution)]
    pub gist_resolution: usize,
    /// Which object-probability file of each record to use
    #[arg(long, default_value_t = FeatureConfig::default().object_source)]
    pub object_source: ObjectSource,
    /// Worker threads for extraction (0 = all cores)
    #[arg(long, default_value_t = 0)]
    pub jobs: usize,
}

impl FeatureArgs {
    pub fn feature_config(&self) -> FeatureConfig {
        FeatureConfig {
            gist_resolution: self.gist_resolution,
            object_source: self.object_source,
            ..FeatureConfig::default()
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct NetArgs {
    /// Hidden layer widths
    #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_HIDDEN.to_vec())]
    pub hidden: Vec<usize>,
    #[arg(long, default_value_t = TrainConfig::default().learning_rate)]
    pub lr: f64,
    #[arg(long, default_value_t = TrainConfig::default().momentum)]
    pub momentum: f64,
    /// Mini-batch size
    #[arg(long, default_value_t = TrainConfig::default().batch_size)]
    pub batch: usize,
    /// Maximum epochs
    #[arg(long, default_value_t = TrainConfig::default().max_epochs)]
    pub epochs: usize,
    /// Epochs without validation improvement before stopping
    #[arg(long, default_value_t = TrainConfig::default().patience)]
    pub patience: usize,
    /// Share of training rows held out for early stopping
    #[arg(long, default_value_t = TrainConfig::default().validation_fraction)]
    pub val_fraction: f64,
    /// Divide the summed batch loss by the batch size
    #[arg(long)]
    pub average_loss: bool,
    #[arg(long, default_value_t = TrainConfig::default().seed)]
    pub seed: u64,
}

impl NetArgs {
    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            learning_rate: self.lr,
            momentum: self.momentum,
            batch_size: self.batch,
            max_epochs: self.epochs,
            patience: self.patience,
            validation_fraction: self.val_fraction,
            average_loss: self.average_loss,
            seed: self.seed,
            ..TrainConfig::default()
        }
    }
}

#[derive(Debug, Args)]
pub struct ExtractArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Output cache; labels go to `<out>.labels.csv`
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub features: FeatureArgs,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub cache: PathBuf,
    #[arg(long, default_value_t = Axis::Valence)]
    pub axis: Axis,
    /// Skip per-column standardization of the features
    #[arg(long)]
    pub no_standardize: bool,
    /// Model file; metadata and loss history are written alongside
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub net: NetArgs,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub cache: PathBuf,
    /// CSV of id,prediction (stdout when absent)
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct InspectArgs {
    #[arg(long)]
    pub model: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum LearnerKind {
    Ffnn,
    Linear,
}

#[derive(Debug, Args)]
pub struct CvArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long, default_value_t = Axis::Valence)]
    pub axis: Axis,
    /// Number of folds (at least 2)
    #[arg(long, default_value_t = 5, value_parser = clap::builder::RangedU64ValueParser::<usize>::new().range(2..))]
    pub k: usize,
    #[arg(long, value_enum, default_value_t = LearnerKind::Ffnn)]
    pub learner: LearnerKind,
    /// Ridge penalty of the linear learner
    #[arg(long, default_value_t = afva_core::experiments::DEFAULT_RIDGE)]
    pub ridge: f64,
    #[arg(long)]
    pub no_standardize: bool,
    /// JSON report (stdout when absent)
    #[arg(long)]
    pub report: Option<PathBuf>,
    #[command(flatten)]
    pub features: FeatureArgs,
    #[command(flatten)]
    pub net: NetArgs,
}

#[derive(Debug, Subcommand)]
pub enum AnalyzeCmd {
    /// Pearson correlation between word and image emotions.
    Correlate(CorrelateArgs),
    /// Most frequent tags per valence-arousal section.
    Grid(GridArgs),
    /// 2-D histogram of the labels.
    Dist(DistArgs),
}

#[derive(Debug, Args)]
pub struct CorrelateArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// CSV with header word,valence,arousal
    #[arg(long)]
    pub dictionary: PathBuf,
    /// JSON output (stdout when absent)
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GridArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// CSV output (stdout when absent)
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DistArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Bins per axis
    #[arg(long, default_value_t = 8)]
    pub bins: usize,
    /// CSV output (stdout when absent)
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExportLabelsArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Rating log written by `serve`
    #[arg(long)]
    pub log: PathBuf,
    /// Updated manifest (JSON lines)
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1:8080")]
    pub listen: String,
    /// Directory of images to rate
    #[arg(long)]
    pub images: PathBuf,
    /// Append-only rating log
    #[arg(long)]
    pub log: PathBuf,
    /// Static files of the rating UI
    #[arg(long)]
    pub ui_dir: Option<PathBuf>,
    /// Seeds every worker's image order
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

fn main() -> ExitCode {
    let args: Vec<_> = std::env::args_os().collect();
    let mut cmd = config::with_env(Cli::command());
    if let Some(path) = config::config_path(&args[1..]) {
        if let Err(e) = config::apply_config_file(path.as_ref(), &cmd) {
            eprintln!("error: {e:#}");
            return ExitCode::from(2);
        }
        cmd = config::with_env(Cli::command());
    }
    let matches = match cmd.try_get_matches_from(&args) {
        Ok(m) => m,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(2);
        }
    };
    for line in config::resolved(&matches) {
        eprintln!("config {line}");
    }
    match commands::run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            let argument = e
                .downcast_ref::<afva_core::Error>()
                .is_some_and(|e| matches!(e, afva_core::Error::Argument(_)));
            ExitCode::from(if argument { 2 } else { 1 })
        }
    }
}
