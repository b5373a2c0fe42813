//! Classical post-processing: binarisation, morphology, region selection,
//! adaptive thresholding, infection quantification and heatmaps.

mod components;
mod mask;
mod morph;
mod pipeline;
mod quant;
mod threshold;

pub use components::{connected_components, select_largest, BoundingBox, Connectivity, Region};
pub use mask::{BinaryMask, StructuringElement};
pub use morph::{close, dilate, erode, open, refine};
pub use pipeline::{run_pipeline, MaskOracle, Mode, PipelineOutput, PipelineParams};
pub use quant::{heatmap_overlay, infection_percentage, InfectionReport};
pub use threshold::{adaptive_threshold, apply_mask, binarize, DEFAULT_OFFSET, DEFAULT_THRESHOLD, DEFAULT_WINDOW};
