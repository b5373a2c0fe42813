//! Network definitions: the IRRCNN classifier and the NABLA-3 segmenter.
//!
//! Both are written once against [`Exec`] so the same definition runs
//! eagerly for inference and on a [`Tape`](crate::tape::Tape) for training.

pub mod irru;
pub mod params;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, shape_err, Result};
use crate::tape::{Eval, Exec};
use crate::tensor::Tensor;
use irru::{init_specs, IrruConfig};
pub use params::{load_weights, save_weights, ParamStore};

/// Per-unit IRRCNN widths at `width_scale = 1`.
pub const IRRCNN_WIDTHS: [usize; 5] = [64, 128, 256, 512, 1024];
/// NABLA-3 encoder feature maps at `width_scale = 1`.
pub const NABLA3_ENCODER: [usize; 6] = [16, 32, 64, 128, 256, 512];
/// Encoder stages the three decoders start from: the bottleneck and the two
/// stages above it.
pub const NABLA3_DECODER_STARTS: [usize; 3] = [5, 4, 3];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Architecture {
    Irrcnn,
    Nabla3,
}

impl fmt::Display for Architecture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Architecture::Irrcnn => "irrcnn",
            Architecture::Nabla3 => "nabla3",
        })
    }
}

/// Channel multiplier `num / den`; scaled widths round up, minimum 1.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WidthScale {
    pub num: usize,
    pub den: usize,
}

impl WidthScale {
    pub const FULL: WidthScale = WidthScale { num: 1, den: 1 };

    pub fn new(num: usize, den: usize) -> Result<Self> {
        if num == 0 || den == 0 {
            return Err(invalid(format!("width scale {num}/{den} must be positive")));
        }
        Ok(Self { num, den })
    }

    pub fn apply(&self, channels: usize) -> usize {
        (channels * self.num).div_ceil(self.den).max(1)
    }
}

impl fmt::Display for WidthScale {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.num, self.den)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub architecture: Architecture,
    /// `[C, H, W]` of a single input.
    pub input_shape: [usize; 3],
    pub width_scale: WidthScale,
    /// Classifier outputs; ignored by NABLA-3.
    pub num_classes: usize,
    /// IRRCNN unit widths before scaling. Defaults to [`IRRCNN_WIDTHS`].
    #[serde(default = "default_irrcnn_widths")]
    pub irrcnn_widths: Vec<usize>,
    /// Recurrent refinements per IRRU branch.
    #[serde(default = "default_recurrence")]
    pub recurrence_steps: usize,
}

fn default_irrcnn_widths() -> Vec<usize> {
    IRRCNN_WIDTHS.to_vec()
}

fn default_recurrence() -> usize {
    2
}

impl ModelConfig {
    pub fn irrcnn(input_shape: [usize; 3], num_classes: usize, width_scale: WidthScale) -> Self {
        Self {
            architecture: Architecture::Irrcnn,
            input_shape,
            width_scale,
            num_classes,
            irrcnn_widths: default_irrcnn_widths(),
            recurrence_steps: default_recurrence(),
        }
    }

    pub fn nabla3(input_shape: [usize; 3], width_scale: WidthScale) -> Self {
        Self {
            architecture: Architecture::Nabla3,
            input_shape,
            width_scale,
            num_classes: 1,
            irrcnn_widths: default_irrcnn_widths(),
            recurrence_steps: default_recurrence(),
        }
    }

    /// Number of 2× downsamplings the architecture applies.
    pub fn depth(&self) -> usize {
        match self.architecture {
            Architecture::Irrcnn => self.irrcnn_widths.len(),
            Architecture::Nabla3 => NABLA3_ENCODER.len() - 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let [c, h, w] = self.input_shape;
        if c == 0 || h == 0 || w == 0 {
            return Err(shape_err(format!("input shape {:?} must be positive", self.input_shape)));
        }
        let factor = 1usize << self.depth();
        if h % factor != 0 || w % factor != 0 {
            return Err(shape_err(format!(
                "{} input {h}x{w} must be divisible by {factor} (2^{})",
                self.architecture,
                self.depth()
            )));
        }
        if self.width_scale.num == 0 || self.width_scale.den == 0 {
            return Err(invalid("width scale must be positive"));
        }
        if self.architecture == Architecture::Irrcnn {
            if self.num_classes == 0 {
                return Err(invalid("num_classes must be at least 1"));
            }
            if self.irrcnn_widths.is_empty() {
                return Err(invalid("IRRCNN needs at least one unit"));
            }
            if self.recurrence_steps == 0 {
                return Err(invalid("recurrence_steps must be at least 1"));
            }
        }
        Ok(())
    }

    fn irru_configs(&self) -> Vec<IrruConfig> {
        let mut in_c = self.input_shape[0];
        self.irrcnn_widths
            .iter()
            .map(|&w| {
                // an IRRU needs at least one channel per branch
                let out = self.width_scale.apply(w).max(2);
                let mut cfg = IrruConfig::new(in_c, out);
                cfg.recurrence_steps = self.recurrence_steps;
                in_c = out;
                cfg
            })
            .collect()
    }

    fn encoder_channels(&self) -> Vec<usize> {
        NABLA3_ENCODER.iter().map(|&c| self.width_scale.apply(c)).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LayerKind {
    Conv,
    Irru,
    Pool,
    Upsample,
    Activation,
    Gap,
    Dense,
    Concat,
    Add,
}

/// One row of a model's layer listing.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub name: String,
    pub kind: LayerKind,
    /// Output feature maps.
    pub feature_maps: usize,
    /// Kernel `(M, N)`; present only for convolutional layers.
    pub kernel: Option<(usize, usize)>,
}

impl LayerSpec {
    fn new(name: impl Into<String>, kind: LayerKind, feature_maps: usize, kernel: Option<(usize, usize)>) -> Self {
        Self { name: name.into(), kind, feature_maps, kernel }
    }
}

/// Anything that maps a normalised `[C,H,W]` input to an output tensor:
/// class probabilities `[K]` or a probability mask `[1,H,W]`.
pub trait Predictor {
    fn input_shape(&self) -> [usize; 3];
    fn predict(&self, input: &Tensor) -> Result<Tensor>;
}

/// A built network and its parameters.
#[derive(Clone, Debug)]
pub struct ModelGraph {
    config: ModelConfig,
    params: ParamStore,
}

pub fn build_irrcnn(config: &ModelConfig, seed: u64) -> Result<ModelGraph> {
    if config.architecture != Architecture::Irrcnn {
        return Err(invalid(format!("build_irrcnn given a {} config", config.architecture)));
    }
    ModelGraph::build(config, seed)
}

pub fn build_nabla3(config: &ModelConfig, seed: u64) -> Result<ModelGraph> {
    if config.architecture != Architecture::Nabla3 {
        return Err(invalid(format!("build_nabla3 given a {} config", config.architecture)));
    }
    ModelGraph::build(config, seed)
}

pub fn param_count(model: &ModelGraph) -> usize {
    model.params.param_count()
}

impl ModelGraph {
    pub fn build(config: &ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut params = ParamStore::new();
        init_specs(&mut params, &Self::param_specs(config)?, seed)?;
        Ok(Self { config: config.clone(), params })
    }

    /// Wraps an existing store after checking it has exactly the expected
    /// names and shapes.
    pub fn from_params(config: &ModelConfig, params: ParamStore) -> Result<Self> {
        config.validate()?;
        let specs = Self::param_specs(config)?;
        if specs.len() != params.len() {
            return Err(shape_err(format!(
                "{} config expects {} tensors, store has {}",
                config.architecture,
                specs.len(),
                params.len()
            )));
        }
        for (name, shape, _) in &specs {
            match params.get(name) {
                None => return Err(shape_err(format!("tensor `{name}` is missing"))),
                Some(t) if t.shape() != shape.as_slice() => {
                    return Err(shape_err(format!("tensor `{name}` has shape {:?}, expected {shape:?}", t.shape())))
                }
                Some(_) => {}
            }
        }
        Ok(Self { config: config.clone(), params })
    }

    fn param_specs(config: &ModelConfig) -> Result<Vec<(String, Vec<usize>, usize)>> {
        let mut specs = Vec::new();
        match config.architecture {
            Architecture::Irrcnn => {
                let units = config.irru_configs();
                for (i, unit) in units.iter().enumerate() {
                    specs.extend(unit.param_specs(&format!("irru{i}"))?);
                }
                let feat = units.last().expect("validated non-empty").out_channels;
                specs.push(("head.weight".into(), vec![config.num_classes, feat], feat));
                specs.push(("head.bias".into(), vec![config.num_classes], 0));
            }
            Architecture::Nabla3 => {
                let enc = config.encoder_channels();
                let mut in_c = config.input_shape[0];
                for (i, &c) in enc.iter().enumerate() {
                    specs.push((format!("enc{i}.weight"), vec![c, in_c, 3, 3], in_c * 9));
                    specs.push((format!("enc{i}.bias"), vec![c], 0));
                    in_c = c;
                }
                let mut fused = 0;
                for (d, &start) in NABLA3_DECODER_STARTS.iter().enumerate() {
                    let mut in_c = enc[start];
                    for (j, stage) in (0..start).rev().enumerate() {
                        let c = enc[stage];
                        specs.push((format!("dec{d}.{j}.weight"), vec![c, in_c, 3, 3], in_c * 9));
                        specs.push((format!("dec{d}.{j}.bias"), vec![c], 0));
                        in_c = c;
                    }
                    fused += in_c;
                }
                specs.push(("out.weight".into(), vec![1, fused, 1, 1], fused));
                specs.push(("out.bias".into(), vec![1], 0));
            }
        }
        Ok(specs)
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }

    pub fn into_params(self) -> ParamStore {
        self.params
    }

    /// Replaces the parameters, keeping the architecture.
    pub fn with_params(&self, params: ParamStore) -> Result<Self> {
        Self::from_params(&self.config, params)
    }

    /// Names of the output head re-initialised by transfer learning.
    pub fn head_names(&self) -> [&'static str; 2] {
        match self.config.architecture {
            Architecture::Irrcnn => ["head.weight", "head.bias"],
            Architecture::Nabla3 => ["out.weight", "out.bias"],
        }
    }

    pub fn param_count(&self) -> usize {
        self.params.param_count()
    }

    fn check_input(&self, shape: &[usize]) -> Result<()> {
        let want = &self.config.input_shape;
        let ok = match shape {
            [c, h, w] => [*c, *h, *w] == *want,
            [_, c, h, w] => [*c, *h, *w] == *want,
            _ => false,
        };
        if !ok {
            return Err(shape_err(format!(
                "{} expects input {want:?} (optionally batched), got {shape:?}",
                self.config.architecture
            )));
        }
        Ok(())
    }

    /// Inference without a tape. `[C,H,W]` in gives an unbatched output;
    /// `[B,C,H,W]` gives one row per sample.
    pub fn forward(&self, batch: &Tensor) -> Result<Tensor> {
        self.check_input(batch.shape())?;
        self.forward_on(&mut Eval, batch)
    }

    /// Runs the network on any execution backend.
    pub fn forward_on<E: Exec>(&self, ex: &mut E, x: &E::Value) -> Result<E::Value> {
        self.check_input(ex.tensor(x).shape())?;
        match self.config.architecture {
            Architecture::Irrcnn => self.irrcnn_forward(ex, x),
            Architecture::Nabla3 => self.nabla3_forward(ex, x),
        }
    }

    fn p<E: Exec>(&self, ex: &mut E, name: &str) -> Result<E::Value> {
        Ok(ex.param(name, self.params.expect(name)?))
    }

    fn irrcnn_forward<E: Exec>(&self, ex: &mut E, x: &E::Value) -> Result<E::Value> {
        let mut h = x.clone();
        for (i, unit) in self.config.irru_configs().iter().enumerate() {
            h = unit.forward(ex, &self.params, &format!("irru{i}"), &h)?;
            h = ex.max_pool2d(&h)?;
        }
        let pooled = ex.global_avg_pool(&h)?;
        let w = self.p(ex, "head.weight")?;
        let b = self.p(ex, "head.bias")?;
        let logits = ex.linear(&pooled, &w, &b)?;
        Ok(ex.softmax(&logits))
    }

    fn nabla3_forward<E: Exec>(&self, ex: &mut E, x: &E::Value) -> Result<E::Value> {
        let depth = NABLA3_ENCODER.len();
        let mut stages = Vec::with_capacity(depth);
        let mut h = x.clone();
        for i in 0..depth {
            if i > 0 {
                h = ex.max_pool2d(&h)?;
            }
            let (w, b) = (self.p(ex, &format!("enc{i}.weight"))?, self.p(ex, &format!("enc{i}.bias"))?);
            let conv = ex.conv2d(&h, &w, &b, 1, 1)?;
            h = ex.relu(&conv);
            stages.push(h.clone());
        }
        let mut heads = Vec::with_capacity(NABLA3_DECODER_STARTS.len());
        for (d, &start) in NABLA3_DECODER_STARTS.iter().enumerate() {
            let mut h = stages[start].clone();
            for j in 0..start {
                let up = ex.upsample2x(&h)?;
                let (w, b) = (self.p(ex, &format!("dec{d}.{j}.weight"))?, self.p(ex, &format!("dec{d}.{j}.bias"))?);
                let conv = ex.conv2d(&up, &w, &b, 1, 1)?;
                h = ex.relu(&conv);
            }
            heads.push(h);
        }
        let fused = ex.concat_channels(&heads)?;
        let (w, b) = (self.p(ex, "out.weight")?, self.p(ex, "out.bias")?);
        let logits = ex.conv2d(&fused, &w, &b, 1, 0)?;
        Ok(ex.sigmoid(&logits))
    }

    /// Layer-by-layer description with scaled feature-map counts.
    pub fn layers(&self) -> Vec<LayerSpec> {
        use LayerKind::*;
        let mut out = Vec::new();
        match self.config.architecture {
            Architecture::Irrcnn => {
                for (i, unit) in self.config.irru_configs().iter().enumerate() {
                    out.push(LayerSpec::new(format!("irru{i}"), Irru, unit.out_channels, None));
                    out.push(LayerSpec::new(format!("pool{i}"), Pool, unit.out_channels, None));
                }
                let feat = out.last().map_or(1, |l| l.feature_maps);
                out.push(LayerSpec::new("gap", Gap, feat, None));
                out.push(LayerSpec::new("head", Dense, self.config.num_classes, None));
                out.push(LayerSpec::new("softmax", Activation, self.config.num_classes, None));
            }
            Architecture::Nabla3 => {
                let enc = self.config.encoder_channels();
                for (i, &c) in enc.iter().enumerate() {
                    if i > 0 {
                        out.push(LayerSpec::new(format!("pool{i}"), Pool, enc[i - 1], None));
                    }
                    out.push(LayerSpec::new(format!("enc{i}"), Conv, c, Some((3, 3))));
                }
                let mut fused = 0;
                for (d, &start) in NABLA3_DECODER_STARTS.iter().enumerate() {
                    for (j, stage) in (0..start).rev().enumerate() {
                        out.push(LayerSpec::new(format!("dec{d}.up{j}"), Upsample, enc[stage + 1], None));
                        out.push(LayerSpec::new(format!("dec{d}.{j}"), Conv, enc[stage], Some((3, 3))));
                    }
                    fused += enc[0];
                }
                out.push(LayerSpec::new("fuse", Concat, fused, None));
                out.push(LayerSpec::new("out", Conv, 1, Some((1, 1))));
                out.push(LayerSpec::new("sigmoid", Activation, 1, None));
            }
        }
        out
    }
}

impl Predictor for ModelGraph {
    fn input_shape(&self) -> [usize; 3] {
        self.config.input_shape
    }

    fn predict(&self, input: &Tensor) -> Result<Tensor> {
        self.forward(input)
    }
}
