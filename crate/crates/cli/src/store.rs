//! Model and corpus files shared by the commands.

use std::fs;
use std::path::{Path, PathBuf};

use cmt::dataset::{read_classification, read_segmentation};
use cmt::models::{load_weights, save_weights, ModelConfig, ModelGraph, ParamStore};
use cmt::training::LabeledDataset;

use crate::args::ModelArgs;
use crate::error::{CliError, Context};

pub const WEIGHTS_FILE: &str = "weights.cmtw";
pub const MODEL_FILE: &str = "model.json";

pub fn create_out(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).or_argument(&format!("cannot create output directory {}", dir.display()))
}

pub fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).or_argument(&format!("cannot write {}", path.display()))
}

pub fn load_params(path: &Path) -> Result<ParamStore, CliError> {
    load_weights(path).or_model(&format!("weights {}", path.display()))
}

pub fn load_model(args: &ModelArgs) -> Result<ModelGraph, CliError> {
    let Some(weights) = &args.weights else {
        return Err(CliError::argument("--weights is required"));
    };
    let config_path = args.model.clone().unwrap_or_else(|| sibling(weights, MODEL_FILE));
    let text = fs::read_to_string(&config_path).or_model(&format!("model config {}", config_path.display()))?;
    let config: ModelConfig =
        serde_json::from_str(&text).or_model(&format!("model config {}", config_path.display()))?;
    let params = load_params(weights)?;
    ModelGraph::from_params(&config, params).or_model(&format!("weights {}", weights.display()))
}

/// Writes `weights.cmtw` and `model.json` into `dir`.
pub fn save_model(dir: &Path, model: &ModelGraph) -> Result<(), CliError> {
    let path = dir.join(WEIGHTS_FILE);
    save_weights(model.params(), &path).or_model(&format!("cannot write {}", path.display()))?;
    let config = serde_json::to_string_pretty(model.config()).expect("config serialises");
    write_text(&dir.join(MODEL_FILE), &(config + "\n"))
}

fn sibling(path: &Path, name: &str) -> PathBuf {
    path.parent().unwrap_or(Path::new(".")).join(name)
}

pub fn is_segmentation_corpus(root: &Path) -> bool {
    root.join("images").is_dir()
}

/// `root/<split>` when it exists, otherwise `root` itself.
pub fn read_classes(root: &Path, split: &str) -> Result<LabeledDataset, CliError> {
    let dir = if root.join(split).is_dir() { root.join(split) } else { root.to_path_buf() };
    read_classification(&dir).or_data(&format!("dataset {}", dir.display()))
}

pub fn read_masks(root: &Path) -> Result<LabeledDataset, CliError> {
    read_segmentation(root).or_data(&format!("dataset {}", root.display()))
}
