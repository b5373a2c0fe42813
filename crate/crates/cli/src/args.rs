use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use cmt::postproc::{Mode, DEFAULT_OFFSET, DEFAULT_THRESHOLD, DEFAULT_WINDOW};
use cmt::synthdata::SynthKind;

#[derive(Debug, Parser)]
#[command(
    name = "cmt",
    version,
    about = "Chest imaging: IRRCNN detection, NABLA-3 segmentation, infection quantification"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic corpus to disk.
    GenData(GenDataArgs),
    /// Train a model from scratch.
    Train(TrainArgs),
    /// Fine-tune from donor weights.
    Transfer(TransferArgs),
    /// Segment, refine, detect infection and quantify.
    Pipeline(PipelineArgs),
    /// Score a trained model on a labelled set.
    Eval(EvalArgs),
}

#[derive(Debug, Args)]
pub struct GenDataArgs {
    /// classification, segmentation or infection
    #[arg(long)]
    pub kind: SynthKind,
    #[arg(long)]
    pub count: usize,
    /// Image side, a multiple of 32.
    #[arg(long, default_value_t = 64)]
    pub size: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Negative:positive ratio, e.g. 1:3.
    #[arg(long)]
    pub imbalance: Option<String>,
    /// Dimmer, wider blobs on positive classification images.
    #[arg(long)]
    pub faint: bool,
    /// Share of a classification corpus written under test/.
    #[arg(long, default_value_t = 0.2)]
    pub test_fraction: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Corpus root written by gen-data (or laid out the same way).
    #[arg(long)]
    pub dataset: PathBuf,
    /// Named preset: xray-det, ct-det, seg or a -desk variant.
    #[arg(long, conflicts_with = "config")]
    pub preset: Option<String>,
    /// Preset TOML file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// Model initialisation and shuffling seed.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    /// Random flip, rotation and shift on every training sample.
    #[arg(long)]
    pub augment: bool,
}

#[derive(Debug, Args)]
pub struct TransferArgs {
    #[command(flatten)]
    pub train: TrainArgs,
    /// Donor weight file (CMTW).
    #[arg(long)]
    pub donor_weights: PathBuf,
    /// Keep the donor's output head instead of re-initialising it.
    #[arg(long)]
    pub keep_head: bool,
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    /// Segmenter or classifier weights (CMTW).
    #[arg(long)]
    pub weights: Option<PathBuf>,
    /// Model config JSON; defaults to model.json beside the weights.
    #[arg(long)]
    pub model: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PipelineArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Replay ground-truth lung masks from this directory (matched by file
    /// name) instead of running a network.
    #[arg(long, conflicts_with = "weights")]
    pub oracle_masks: Option<PathBuf>,
    /// An image file or a directory of PGM/PPM images.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
    pub threshold: f64,
    #[arg(long, default_value_t = DEFAULT_WINDOW)]
    pub window: usize,
    #[arg(long, default_value_t = DEFAULT_OFFSET, allow_hyphen_values = true)]
    pub offset: f64,
    /// chest keeps one region, lung keeps two.
    #[arg(long, default_value_t = Mode::Lung)]
    pub mode: Mode,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Score the ground truth against itself instead of a model.
    #[arg(long, conflicts_with = "weights")]
    pub oracle: bool,
    #[arg(long)]
    pub dataset: PathBuf,
    /// Positive class index for precision, recall and AUC.
    #[arg(long, default_value_t = 1)]
    pub positive: usize,
    #[arg(long)]
    pub out: PathBuf,
}
