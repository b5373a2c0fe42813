//! Multi-task chest imaging pipeline built from scratch: a small
//! reverse-mode autodiff engine, the IRRCNN classifier and NABLA-3
//! segmenter, training utilities, morphology post-processing, infection
//! quantification, evaluation metrics and synthetic data generators.

pub mod dataset;
pub mod error;
pub mod imaging;
pub mod metrics;
pub mod models;
pub mod ops;
pub mod postproc;
pub mod synthdata;
pub mod tape;
pub mod tensor;
pub mod training;

pub use error::{Error, ImageError, Result, WeightsError};
pub use imaging::{GrayImage, RgbImage};
pub use postproc::{BinaryMask, InfectionReport};
pub use tape::{Eval, Exec, Gradients, Tape, Var};
pub use tensor::{he_init, Tensor};

pub use models::{build_irrcnn, build_nabla3, param_count, ModelConfig, ModelGraph, ParamStore, Predictor};
