use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::components::{connected_components, select_largest, Connectivity};
use super::mask::{BinaryMask, StructuringElement};
use super::morph::{close, open};
use super::quant::{heatmap_overlay, infection_percentage, InfectionReport};
use super::threshold::{adaptive_threshold, apply_mask, binarize, DEFAULT_OFFSET, DEFAULT_THRESHOLD, DEFAULT_WINDOW};
use crate::error::{invalid, Error, Result};
use crate::imaging::{resize, GrayImage, RgbImage};
use crate::models::Predictor;
use crate::tensor::Tensor;
use crate::training::prepare_input;

/// What the segmenter outlines: one chest region or two lungs.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Chest,
    #[default]
    Lung,
}

impl Mode {
    pub fn regions(self) -> usize {
        match self {
            Self::Chest => 1,
            Self::Lung => 2,
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Chest => "chest",
            Self::Lung => "lung",
        })
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "chest" => Ok(Self::Chest),
            "lung" => Ok(Self::Lung),
            _ => Err(invalid(format!("unknown mode {s:?}, expected chest or lung"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PipelineParams {
    pub mode: Mode,
    pub threshold: f64,
    pub window: usize,
    pub offset: f64,
    pub element: StructuringElement,
    pub connectivity: Connectivity,
}

impl Default for PipelineParams {
    fn default() -> Self {
        Self::new(Mode::default())
    }
}

impl PipelineParams {
    pub fn new(mode: Mode) -> Self {
        Self {
            mode,
            threshold: DEFAULT_THRESHOLD,
            window: DEFAULT_WINDOW,
            offset: DEFAULT_OFFSET,
            element: StructuringElement::default(),
            connectivity: Connectivity::default(),
        }
    }
}

/// Every artefact of one pipeline run, all at model resolution.
#[derive(Clone, Debug, PartialEq)]
pub struct PipelineOutput {
    /// Input resized to the model's spatial size.
    pub image: GrayImage,
    pub probabilities: Tensor,
    /// Thresholded network output before refinement.
    pub raw_mask: BinaryMask,
    pub region_mask: BinaryMask,
    pub infected_mask: BinaryMask,
    pub report: InfectionReport,
    pub heatmap: RgbImage,
}

/// Runs segmentation, refinement, region selection, infection detection,
/// quantification and the heatmap on one image.
pub fn run_pipeline(image: &GrayImage, model: &dyn Predictor, params: &PipelineParams) -> Result<PipelineOutput> {
    let [_, h, w] = model.input_shape();
    let input = prepare_input(image, model.input_shape())?;
    let probabilities = model.predict(&input)?;
    let raw_mask = binarize(&probabilities, params.threshold)?;
    if raw_mask.dims() != (w, h) {
        return Err(invalid(format!(
            "segmenter produced a {}x{} mask for a {w}x{h} input",
            raw_mask.width(),
            raw_mask.height()
        )));
    }
    let refined = open(&close(&raw_mask, &params.element), &params.element);
    let regions = connected_components(&refined, params.connectivity);
    let region_mask = select_largest(&regions, params.mode.regions(), w, h);
    let resized = resize(image, w, h)?;
    let extracted = apply_mask(&resized, &region_mask)?;
    let infected_mask = adaptive_threshold(&extracted, &region_mask, params.window, params.offset)?;
    let report = infection_percentage(&region_mask, &infected_mask)?;
    let heatmap = heatmap_overlay(&resized, &infected_mask)?;
    Ok(PipelineOutput { image: resized, probabilities, raw_mask, region_mask, infected_mask, report, heatmap })
}

/// Stand-in segmenter that replays a known mask, used to check the classical
/// stages against ground truth independently of a trained network.
#[derive(Clone, Debug)]
pub struct MaskOracle {
    mask: BinaryMask,
}

impl MaskOracle {
    pub fn new(mask: BinaryMask) -> Self {
        Self { mask }
    }
}

impl Predictor for MaskOracle {
    fn input_shape(&self) -> [usize; 3] {
        [1, self.mask.height(), self.mask.width()]
    }

    fn predict(&self, _input: &Tensor) -> Result<Tensor> {
        Ok(self.mask.to_tensor())
    }
}
