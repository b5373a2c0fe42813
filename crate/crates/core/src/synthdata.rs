//! Seeded synthetic corpora with exact ground truth: blob/no-blob
//! classification images, two-ellipse "lung" segmentation images, and
//! lung images with bright infected discs.

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::GrayImage;
use crate::postproc::{
    connected_components, infection_percentage, refine, BinaryMask, Connectivity, InfectionReport, StructuringElement,
};
use crate::tensor::{derive_seed, seeded_rng, SeededRng};
use crate::training::LabeledDataset;

/// Class directory names, in label order.
pub const CLASS_NAMES: [&str; 2] = ["negative", "positive"];

/// Lung pixels vary by at most this much around their lung's base value.
pub const LUNG_NOISE: i32 = 2;
/// Infected discs are this much brighter than their lung, at least.
pub const MIN_INFECTION_MARGIN: i32 = 60;
pub const MAX_INFECTION_MARGIN: i32 = 80;
/// Every infected disc centre keeps a disc of this radius inside the lung.
pub const INFECTION_CLEARANCE: i64 = 6;
/// Minimum distance between infected disc centres.
pub const INFECTION_SPACING: i64 = 18;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SynthKind {
    Classification,
    Segmentation,
    Infection,
}

impl std::str::FromStr for SynthKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "classification" => Ok(Self::Classification),
            "segmentation" => Ok(Self::Segmentation),
            "infection" => Ok(Self::Infection),
            _ => Err(Error::Config(format!(
                "unknown corpus kind `{s}`; expected classification, segmentation or infection"
            ))),
        }
    }
}

/// Shape of the bright "opacity" blobs that mark positive classification
/// images. Radii are fractions of the image side.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlobRecipe {
    pub min_blobs: usize,
    pub max_blobs: usize,
    pub min_amplitude: f64,
    pub max_amplitude: f64,
    pub min_sigma: f64,
    pub max_sigma: f64,
}

impl Default for BlobRecipe {
    fn default() -> Self {
        Self::bright()
    }
}

impl BlobRecipe {
    /// Two to five strong, compact blobs.
    pub fn bright() -> Self {
        Self { min_blobs: 2, max_blobs: 5, min_amplitude: 70.0, max_amplitude: 110.0, min_sigma: 0.04, max_sigma: 0.08 }
    }

    /// One to three dimmer, wider blobs.
    pub fn faint() -> Self {
        Self { min_blobs: 1, max_blobs: 3, min_amplitude: 35.0, max_amplitude: 55.0, min_sigma: 0.06, max_sigma: 0.1 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSpec {
    pub kind: SynthKind,
    pub count: usize,
    /// Side of the square images.
    pub size: usize,
    pub seed: u64,
    /// Negative:positive ratio for classification sets; balanced if absent.
    #[serde(default)]
    pub imbalance: Option<[usize; 2]>,
    #[serde(default)]
    pub blobs: BlobRecipe,
}

impl SynthSpec {
    pub fn new(kind: SynthKind, count: usize, size: usize, seed: u64) -> Self {
        Self { kind, count, size, seed, imbalance: None, blobs: BlobRecipe::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.count == 0 {
            return Err(Error::Config("corpus needs at least one sample".into()));
        }
        if self.size == 0 || !self.size.is_multiple_of(32) {
            return Err(Error::Config(format!("image size {} must be a positive multiple of 32", self.size)));
        }
        if let Some([a, b]) = self.imbalance {
            if a == 0 || b == 0 || !self.count.is_multiple_of(a + b) {
                return Err(Error::Config(format!("count {} cannot be split exactly {a}:{b}", self.count)));
            }
        }
        let r = &self.blobs;
        if r.min_blobs > r.max_blobs
            || r.min_amplitude > r.max_amplitude
            || r.min_sigma > r.max_sigma
            || r.min_sigma <= 0.0
        {
            return Err(Error::Config("blob recipe ranges must be ordered and positive".into()));
        }
        Ok(())
    }

    /// `[negative, positive]` sample counts.
    pub fn class_counts(&self) -> [usize; 2] {
        match self.imbalance {
            Some([a, b]) => {
                let unit = self.count / (a + b);
                [a * unit, b * unit]
            }
            None => [self.count - self.count / 2, self.count / 2],
        }
    }
}

/// Axis-aligned ellipse in continuous pixel coordinates; pixel `(x, y)`
/// belongs to it when its centre `(x + ½, y + ½)` does.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ellipse {
    pub cx: f64,
    pub cy: f64,
    pub a: f64,
    pub b: f64,
}

impl Ellipse {
    pub fn contains(&self, x: usize, y: usize) -> bool {
        let dx = (x as f64 + 0.5 - self.cx) / self.a;
        let dy = (y as f64 + 0.5 - self.cy) / self.b;
        dx * dx + dy * dy <= 1.0
    }

    pub fn rasterize(&self, width: usize, height: usize) -> BinaryMask {
        BinaryMask::from_fn(width, height, |x, y| self.contains(x, y))
    }
}

fn clamp_u8(v: f64) -> u8 {
    v.round().clamp(0.0, 255.0) as u8
}

fn classification_image(size: usize, positive: bool, recipe: &BlobRecipe, rng: &mut SeededRng) -> GrayImage {
    let s = size as f64;
    let cx = s / 2.0 + rng.random_range(-0.1..=0.1) * s;
    let cy = s / 2.0 + rng.random_range(-0.1..=0.1) * s;
    let base = rng.random_range(100.0..=140.0);
    let falloff = rng.random_range(40.0..=70.0);
    let mut plane: Vec<f64> = (0..size * size)
        .map(|i| {
            let (x, y) = ((i % size) as f64 + 0.5, (i / size) as f64 + 0.5);
            let r = ((x - cx).powi(2) + (y - cy).powi(2)).sqrt() / (0.75 * s);
            base - falloff * r * r
        })
        .collect();
    for v in plane.iter_mut() {
        *v += rng.random_range(-6.0..=6.0);
    }
    if positive {
        let n = rng.random_range(recipe.min_blobs..=recipe.max_blobs);
        for _ in 0..n {
            let bx = rng.random_range(0.2..=0.8) * s;
            let by = rng.random_range(0.2..=0.8) * s;
            let sigma = rng.random_range(recipe.min_sigma..=recipe.max_sigma) * s;
            let amp = rng.random_range(recipe.min_amplitude..=recipe.max_amplitude);
            for (i, v) in plane.iter_mut().enumerate() {
                let (x, y) = ((i % size) as f64 + 0.5, (i / size) as f64 + 0.5);
                let d2 = (x - bx).powi(2) + (y - by).powi(2);
                *v += amp * (-d2 / (2.0 * sigma * sigma)).exp();
            }
        }
    }
    GrayImage::new(size, size, plane.into_iter().map(clamp_u8).collect()).expect("square plane")
}

/// Radial-gradient images; positives add bright soft blobs. Labels are
/// shuffled under `SynthSpec::seed`.
pub fn gen_classification_set(spec: &SynthSpec) -> Result<LabeledDataset> {
    spec.validate()?;
    let [n0, n1] = spec.class_counts();
    let mut labels: Vec<usize> = std::iter::repeat_n(0, n0).chain(std::iter::repeat_n(1, n1)).collect();
    labels.shuffle(&mut seeded_rng(derive_seed(spec.seed, u64::MAX)));
    let samples = labels
        .into_iter()
        .enumerate()
        .map(|(i, label)| {
            let mut rng = seeded_rng(derive_seed(spec.seed, i as u64));
            (classification_image(spec.size, label == 1, &spec.blobs, &mut rng), label)
        })
        .collect();
    LabeledDataset::classification(CLASS_NAMES.iter().map(|s| s.to_string()).collect(), samples)
}

/// Left and right lung ellipses, always separated by a background gap.
fn sample_lungs(size: usize, rng: &mut SeededRng) -> [Ellipse; 2] {
    let s = size as f64;
    let mut lung = |centre: f64| Ellipse {
        cx: (centre + rng.random_range(-0.015..=0.015)) * s,
        cy: rng.random_range(0.45..=0.55) * s,
        a: rng.random_range(0.11..=0.16) * s,
        b: rng.random_range(0.25..=0.32) * s,
    };
    [lung(0.295), lung(0.705)]
}

fn background(size: usize, rng: &mut SeededRng) -> Vec<f64> {
    let s = size as f64;
    let (l1, l2) = (rng.random_range(0.15..=0.35) * s, rng.random_range(0.15..=0.35) * s);
    let (p1, p2) = (rng.random_range(0.0..std::f64::consts::TAU), rng.random_range(0.0..std::f64::consts::TAU));
    let mut plane = Vec::with_capacity(size * size);
    for y in 0..size {
        for x in 0..size {
            let tex =
                (std::f64::consts::TAU * x as f64 / l1 + p1).sin() * (std::f64::consts::TAU * y as f64 / l2 + p2).cos();
            plane.push(55.0 + 10.0 * tex + rng.random_range(-5.0..=5.0));
        }
    }
    plane
}

/// Renders lungs of per-lung base brightness onto a textured background.
/// `extra(x, y)` adds intensity inside the lungs.
fn render_lungs(
    size: usize,
    lungs: &[BinaryMask; 2],
    rng: &mut SeededRng,
    extra: impl Fn(usize, usize) -> i32,
) -> GrayImage {
    let bg = background(size, rng);
    let bases = [rng.random_range(110..=130), rng.random_range(110..=130)];
    let mut pixels = Vec::with_capacity(size * size);
    for y in 0..size {
        for x in 0..size {
            let v = match lungs.iter().position(|m| m.get(x, y)) {
                Some(k) => f64::from(bases[k] + rng.random_range(-LUNG_NOISE..=LUNG_NOISE) + extra(x, y)),
                None => bg[y * size + x],
            };
            pixels.push(clamp_u8(v));
        }
    }
    GrayImage::new(size, size, pixels).expect("square plane")
}

/// One segmentation sample: image, exact ellipse raster, and the ellipses.
pub fn segmentation_sample(size: usize, seed: u64) -> (GrayImage, BinaryMask, [Ellipse; 2]) {
    let mut rng = seeded_rng(seed);
    let ellipses = sample_lungs(size, &mut rng);
    let lungs = ellipses.map(|e| e.rasterize(size, size));
    let image = render_lungs(size, &lungs, &mut rng, |_, _| 0);
    let mask = lungs[0].union(&lungs[1]).expect("same dims");
    (image, mask, ellipses)
}

/// Two bright ellipses on a dark textured background, masks exact.
pub fn gen_segmentation_set(spec: &SynthSpec) -> Result<LabeledDataset> {
    spec.validate()?;
    let samples = (0..spec.count)
        .map(|i| {
            let (image, mask, _) = segmentation_sample(spec.size, derive_seed(spec.seed, i as u64));
            (image, mask)
        })
        .collect();
    LabeledDataset::segmentation(samples)
}

#[derive(Clone, Debug, PartialEq)]
pub struct InfectionSample {
    pub image: GrayImage,
    pub lung: BinaryMask,
    pub infected: BinaryMask,
    pub report: InfectionReport,
}

/// Integer disc `(x - cx)² + (y - cy)² ≤ r²`.
pub fn disc(width: usize, height: usize, cx: i64, cy: i64, r: i64) -> BinaryMask {
    BinaryMask::from_fn(width, height, |x, y| {
        let (dx, dy) = (x as i64 - cx, y as i64 - cy);
        dx * dx + dy * dy <= r * r
    })
}

/// Repeats close-then-open until nothing changes.
fn refine_to_fixpoint(mut mask: BinaryMask) -> BinaryMask {
    let se = StructuringElement::default();
    loop {
        let next = refine(&mask, &se);
        if next == mask {
            return mask;
        }
        mask = next;
    }
}

fn infection_sample(size: usize, seed: u64) -> InfectionSample {
    let mut rng = seeded_rng(seed);
    let lungs = loop {
        let ellipses = sample_lungs(size, &mut rng);
        let lungs = ellipses.map(|e| refine_to_fixpoint(e.rasterize(size, size)));
        let union = lungs[0].union(&lungs[1]).expect("same dims");
        if connected_components(&union, Connectivity::Eight).len() == 2 {
            break lungs;
        }
    };
    let mut centres: Vec<(i64, i64, i64, i32)> = Vec::new();
    for lung in &lungs {
        let candidates: Vec<(i64, i64)> = (0..size as i64)
            .flat_map(|y| (0..size as i64).map(move |x| (x, y)))
            .filter(|&(x, y)| disc(size, size, x, y, INFECTION_CLEARANCE).is_subset_of(lung))
            .collect();
        let wanted = rng.random_range(1..=2);
        let mut placed = 0;
        for _ in 0..64 {
            if placed == wanted || candidates.is_empty() {
                break;
            }
            let &(x, y) = candidates.choose(&mut rng).expect("non-empty");
            let clear =
                centres.iter().all(|&(ox, oy, _, _)| (ox - x).pow(2) + (oy - y).pow(2) >= INFECTION_SPACING.pow(2));
            if clear {
                let r = rng.random_range(2..=3);
                let margin = rng.random_range(MIN_INFECTION_MARGIN..=MAX_INFECTION_MARGIN);
                centres.push((x, y, r, margin));
                placed += 1;
            }
        }
    }
    let discs: Vec<(BinaryMask, i32)> = centres.iter().map(|&(x, y, r, m)| (disc(size, size, x, y, r), m)).collect();
    let image =
        render_lungs(size, &lungs, &mut rng, |x, y| discs.iter().find(|(d, _)| d.get(x, y)).map_or(0, |&(_, m)| m));
    let lung = lungs[0].union(&lungs[1]).expect("same dims");
    let infected = discs.iter().fold(BinaryMask::empty(size, size), |acc, (d, _)| acc.union(d).expect("same dims"));
    let report = infection_percentage(&lung, &infected).expect("same dims");
    InfectionSample { image, lung, infected, report }
}

/// Lung images with bright infected discs well inside the lungs. Lung masks
/// are stable under the close/open refinement and have exactly two
/// components; the reports count the exact masks.
pub fn gen_infection_set(spec: &SynthSpec) -> Result<Vec<InfectionSample>> {
    spec.validate()?;
    Ok((0..spec.count).map(|i| infection_sample(spec.size, derive_seed(spec.seed, i as u64))).collect())
}

/// The (image, lung mask) pairs of an infection corpus.
pub fn infection_segmentation_set(samples: &[InfectionSample]) -> Result<LabeledDataset> {
    LabeledDataset::segmentation(samples.iter().map(|s| (s.image.clone(), s.lung.clone())).collect())
}

/// Masks with exactly `lung` and `infected` set pixels, filled in row-major
/// order; the infected pixels are the first ones of the lung.
pub fn counted_masks(width: usize, height: usize, lung: usize, infected: usize) -> Result<(BinaryMask, BinaryMask)> {
    if lung > width * height || infected > lung {
        return Err(Error::Config(format!("cannot place {infected} of {lung} pixels in {width}x{height}")));
    }
    let l = BinaryMask::from_fn(width, height, |x, y| y * width + x < lung);
    let i = BinaryMask::from_fn(width, height, |x, y| y * width + x < infected);
    Ok((l, i))
}
