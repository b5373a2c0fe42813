use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{invalid, Error, Result};
use crate::imaging::{resize_plane, GrayImage};
use crate::postproc::BinaryMask;
use crate::tensor::{derive_seed, seeded_rng, Tensor};

#[derive(Clone, Debug, PartialEq)]
pub enum Target {
    Class(usize),
    Mask(BinaryMask),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub image: GrayImage,
    pub target: Target,
}

/// Images with either class labels or segmentation masks, never both.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LabeledDataset {
    samples: Vec<Sample>,
    /// Empty for segmentation sets.
    class_names: Vec<String>,
}

impl LabeledDataset {
    pub fn classification(class_names: Vec<String>, samples: Vec<(GrayImage, usize)>) -> Result<Self> {
        if class_names.is_empty() {
            return Err(Error::Dataset("classification set needs at least one class".into()));
        }
        let k = class_names.len();
        if let Some((_, bad)) = samples.iter().find(|(_, c)| *c >= k) {
            return Err(Error::Dataset(format!("label {bad} outside the {k} declared classes")));
        }
        let samples = samples.into_iter().map(|(image, c)| Sample { image, target: Target::Class(c) }).collect();
        Ok(Self { samples, class_names })
    }

    pub fn segmentation(samples: Vec<(GrayImage, BinaryMask)>) -> Result<Self> {
        for (i, (img, mask)) in samples.iter().enumerate() {
            if (img.width(), img.height()) != mask.dims() {
                return Err(Error::Dataset(format!(
                    "sample {i}: image {}x{} but mask {}x{}",
                    img.width(),
                    img.height(),
                    mask.width(),
                    mask.height()
                )));
            }
        }
        let samples = samples.into_iter().map(|(image, m)| Sample { image, target: Target::Mask(m) }).collect();
        Ok(Self { samples, class_names: Vec::new() })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn num_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn is_segmentation(&self) -> bool {
        self.class_names.is_empty()
    }

    /// Label of sample `i`; segmentation samples all count as class 0.
    pub fn label(&self, i: usize) -> usize {
        match self.samples[i].target {
            Target::Class(c) => c,
            Target::Mask(_) => 0,
        }
    }

    pub fn labels(&self) -> Vec<usize> {
        (0..self.len()).map(|i| self.label(i)).collect()
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.num_classes().max(1)];
        for i in 0..self.len() {
            counts[self.label(i)] += 1;
        }
        counts
    }

    /// The samples at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Self {
        Self {
            samples: indices.iter().map(|&i| self.samples[i].clone()).collect(),
            class_names: self.class_names.clone(),
        }
    }

    fn push(&mut self, sample: Sample) {
        self.samples.push(sample);
    }
}

/// `(x - min) / (max - min)` as a `[1, H, W]` tensor; constant images map
/// to zeros.
pub fn minmax_normalize(image: &GrayImage) -> Tensor {
    let px = image.pixels();
    let lo = *px.iter().min().expect("images are non-empty");
    let hi = *px.iter().max().expect("images are non-empty");
    let data = if hi == lo {
        vec![0.0; px.len()]
    } else {
        let span = f64::from(hi - lo);
        px.iter().map(|&p| f64::from(p - lo) / span).collect()
    };
    Tensor::new(vec![1, image.height(), image.width()], data).expect("dims match")
}

/// Normalises and resamples `image` to a `[C, H, W]` network input.
pub fn prepare_input(image: &GrayImage, input_shape: [usize; 3]) -> Result<Tensor> {
    let [c, h, w] = input_shape;
    if c != 1 {
        return Err(invalid(format!("inputs are single-channel, model expects {c}")));
    }
    let normalized = minmax_normalize(image);
    let plane = resize_plane(normalized.data(), image.width(), image.height(), 1, w, h);
    Tensor::new(vec![1, h, w], plane)
}

/// Resamples a mask to `width × height` and returns it as a `[1, H, W]`
/// tensor of zeros and ones.
pub fn prepare_mask(mask: &BinaryMask, width: usize, height: usize) -> Tensor {
    let plane = resize_plane(mask.pixels(), mask.width(), mask.height(), 1, width, height);
    BinaryMask::new(width, height, plane).expect("dims match").to_tensor()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AugmentParams {
    pub flip_probability: f64,
    pub max_rotation_degrees: f64,
    /// Largest shift as a fraction of each side.
    pub max_shift_fraction: f64,
}

impl Default for AugmentParams {
    fn default() -> Self {
        Self { flip_probability: 0.5, max_rotation_degrees: 10.0, max_shift_fraction: 0.05 }
    }
}

/// One concrete geometric transform: optional horizontal flip, then rotation
/// about the image centre, then an integer shift.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Transform {
    pub flip: bool,
    pub degrees: f64,
    pub shift_x: i64,
    pub shift_y: i64,
}

impl Transform {
    pub const IDENTITY: Transform = Transform { flip: false, degrees: 0.0, shift_x: 0, shift_y: 0 };

    pub fn sample(params: &AugmentParams, width: usize, height: usize, seed: u64) -> Self {
        let mut rng = seeded_rng(seed);
        let flip = rng.random_bool(params.flip_probability.clamp(0.0, 1.0));
        let d = params.max_rotation_degrees;
        let degrees = if d > 0.0 { rng.random_range(-d..=d) } else { 0.0 };
        let max_x = (params.max_shift_fraction * width as f64).round() as i64;
        let max_y = (params.max_shift_fraction * height as f64).round() as i64;
        let shift_x = rng.random_range(-max_x..=max_x);
        let shift_y = rng.random_range(-max_y..=max_y);
        Self { flip, degrees, shift_x, shift_y }
    }

    /// Source pixel for output `(x, y)`, or `None` when it falls outside.
    fn source(&self, x: usize, y: usize, width: usize, height: usize) -> Option<(usize, usize)> {
        let cx = (width as f64 - 1.0) / 2.0;
        let cy = (height as f64 - 1.0) / 2.0;
        let px = x as f64 - self.shift_x as f64 - cx;
        let py = y as f64 - self.shift_y as f64 - cy;
        let (sin, cos) = (-self.degrees.to_radians()).sin_cos();
        let mut sx = cos * px - sin * py + cx;
        let sy = sin * px + cos * py + cy;
        if self.flip {
            sx = 2.0 * cx - sx;
        }
        let (sx, sy) = (sx.round(), sy.round());
        if sx < 0.0 || sy < 0.0 || sx >= width as f64 || sy >= height as f64 {
            return None;
        }
        Some((sx as usize, sy as usize))
    }

    pub fn apply(&self, image: &GrayImage) -> GrayImage {
        let (w, h) = (image.width(), image.height());
        GrayImage::from_fn(w, h, |x, y| self.source(x, y, w, h).map_or(0, |(sx, sy)| image.get(sx, sy)))
    }

    pub fn apply_mask(&self, mask: &BinaryMask) -> BinaryMask {
        let (w, h) = mask.dims();
        BinaryMask::from_fn(w, h, |x, y| self.source(x, y, w, h).is_some_and(|(sx, sy)| mask.get(sx, sy)))
    }
}

/// Random flip, rotation and shift drawn from `seed`; the mask, if any,
/// receives the identical transform.
pub fn augment(image: &GrayImage, mask: Option<&BinaryMask>, seed: u64) -> Result<(GrayImage, Option<BinaryMask>)> {
    augment_with(image, mask, &AugmentParams::default(), seed)
}

pub fn augment_with(
    image: &GrayImage,
    mask: Option<&BinaryMask>,
    params: &AugmentParams,
    seed: u64,
) -> Result<(GrayImage, Option<BinaryMask>)> {
    if let Some(m) = mask {
        if m.dims() != (image.width(), image.height()) {
            return Err(invalid("augment: mask and image sizes differ"));
        }
    }
    let t = Transform::sample(params, image.width(), image.height(), seed);
    Ok((t.apply(image), mask.map(|m| t.apply_mask(m))))
}

fn augment_sample(sample: &Sample, seed: u64) -> Result<Sample> {
    Ok(match &sample.target {
        Target::Class(c) => Sample { image: augment(&sample.image, None, seed)?.0, target: Target::Class(*c) },
        Target::Mask(m) => {
            let (image, mask) = augment(&sample.image, Some(m), seed)?;
            Sample { image, target: Target::Mask(mask.expect("mask given")) }
        }
    })
}

/// Tops every class up to the majority count with augmented copies of its
/// own samples, appended after the originals.
pub fn balance_classes(ds: &LabeledDataset, seed: u64) -> Result<LabeledDataset> {
    if ds.is_segmentation() {
        return Err(Error::Dataset("balance_classes needs a classification set".into()));
    }
    let counts = ds.class_counts();
    if let Some(c) = counts.iter().position(|&n| n == 0) {
        return Err(Error::Dataset(format!("class `{}` has no samples", ds.class_names[c])));
    }
    let target = *counts.iter().max().expect("at least one class");
    let mut out = ds.clone();
    let mut stream = 0u64;
    for (class, &n) in counts.iter().enumerate() {
        let members: Vec<usize> = (0..ds.len()).filter(|&i| ds.label(i) == class).collect();
        for j in 0..target - n {
            let src = &ds.samples[members[j % members.len()]];
            out.push(augment_sample(src, derive_seed(seed, stream))?);
            stream += 1;
        }
    }
    Ok(out)
}

/// Stratified split: each class sends `round(fraction · count)` of its
/// samples, chosen by a seeded shuffle, to the first part. Both parts keep
/// the original sample order.
pub fn split_dataset(ds: &LabeledDataset, train_fraction: f64, seed: u64) -> Result<(LabeledDataset, LabeledDataset)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(invalid(format!("train fraction {train_fraction} must lie strictly between 0 and 1")));
    }
    let mut train = Vec::new();
    let mut rest = Vec::new();
    for class in 0..ds.class_counts().len() {
        let mut members: Vec<usize> = (0..ds.len()).filter(|&i| ds.label(i) == class).collect();
        members.shuffle(&mut seeded_rng(derive_seed(seed, class as u64)));
        let n_train = (train_fraction * members.len() as f64).round() as usize;
        train.extend_from_slice(&members[..n_train]);
        rest.extend_from_slice(&members[n_train..]);
    }
    if train.is_empty() || rest.is_empty() {
        return Err(Error::Dataset(format!(
            "splitting {} samples at {train_fraction} leaves one side empty",
            ds.len()
        )));
    }
    train.sort_unstable();
    rest.sort_unstable();
    Ok((ds.subset(&train), ds.subset(&rest)))
}
