//! Independent reference implementations shared by the integration tests.

#![allow(dead_code)]

use cmt::imaging::GrayImage;
use cmt::postproc::{BinaryMask, StructuringElement};
use cmt::tensor::{seeded_rng, Tensor};
use rand::Rng;

pub const FD_STEP: f64 = 1e-5;
pub const FD_TOLERANCE: f64 = 1e-3;

/// Relative error with a floor so that two near-zero values compare equal.
pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-7)
}

/// Central difference of `f` along coordinate `i` of `x`.
pub fn central_difference(x: &Tensor, i: usize, f: &dyn Fn(&Tensor) -> f64) -> f64 {
    let mut plus = x.clone();
    plus.data_mut()[i] += FD_STEP;
    let mut minus = x.clone();
    minus.data_mut()[i] -= FD_STEP;
    (f(&plus) - f(&minus)) / (2.0 * FD_STEP)
}

pub fn random_tensor(shape: &[usize], lo: f64, hi: f64, seed: u64) -> Tensor {
    let mut rng = seeded_rng(seed);
    let n = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| rng.random_range(lo..hi)).collect()).unwrap()
}

/// Values in `[lo, hi]` pushed at least `gap` away from zero.
pub fn random_away_from_zero(shape: &[usize], hi: f64, gap: f64, seed: u64) -> Tensor {
    random_tensor(shape, -hi, hi, seed).map(|v| if v.abs() < gap { v.signum() * gap + v } else { v })
}

pub fn random_mask(width: usize, height: usize, density: f64, seed: u64) -> BinaryMask {
    let mut rng = seeded_rng(seed);
    let px = (0..width * height).map(|_| rng.random_bool(density)).collect();
    BinaryMask::new(width, height, px).unwrap()
}

/// Random mask whose outer `margin` rows and columns are background.
pub fn random_interior_mask(width: usize, height: usize, margin: usize, density: f64, seed: u64) -> BinaryMask {
    let m = random_mask(width, height, density, seed);
    BinaryMask::from_fn(width, height, |x, y| {
        x >= margin && y >= margin && x + margin < width && y + margin < height && m.get(x, y)
    })
}

pub fn random_image(width: usize, height: usize, seed: u64) -> GrayImage {
    let mut rng = seeded_rng(seed);
    GrayImage::new(width, height, (0..width * height).map(|_| rng.random()).collect()).unwrap()
}

fn element_cells(se: &StructuringElement) -> Vec<(i64, i64)> {
    se.offsets().iter().map(|&(dx, dy)| (dx as i64, dy as i64)).collect()
}

/// `{p : p + b ∈ M for every b ∈ B}` with the outside read as background.
pub fn erode_oracle(m: &BinaryMask, se: &StructuringElement) -> BinaryMask {
    let (w, h) = (m.width() as i64, m.height() as i64);
    let cells = element_cells(se);
    let mut out = BinaryMask::empty(m.width(), m.height());
    for y in 0..h {
        for x in 0..w {
            let mut keep = true;
            for &(dx, dy) in &cells {
                let (qx, qy) = (x + dx, y + dy);
                if qx < 0 || qy < 0 || qx >= w || qy >= h || !m.get(qx as usize, qy as usize) {
                    keep = false;
                }
            }
            out.set(x as usize, y as usize, keep);
        }
    }
    out
}

/// Minkowski sum `{m + b}`, scattering from every set pixel.
pub fn dilate_oracle(m: &BinaryMask, se: &StructuringElement) -> BinaryMask {
    let (w, h) = (m.width() as i64, m.height() as i64);
    let cells = element_cells(se);
    let mut out = BinaryMask::empty(m.width(), m.height());
    for y in 0..h {
        for x in 0..w {
            if !m.get(x as usize, y as usize) {
                continue;
            }
            for &(dx, dy) in &cells {
                let (px, py) = (x + dx, y + dy);
                if px >= 0 && py >= 0 && px < w && py < h {
                    out.set(px as usize, py as usize, true);
                }
            }
        }
    }
    out
}

/// `P(score₊ > score₋) + ½·P(score₊ = score₋)` over all pairs.
pub fn pairwise_auc(scores: &[f64], labels: &[bool]) -> f64 {
    let (mut wins, mut pairs) = (0.0, 0.0);
    for (i, &si) in scores.iter().enumerate() {
        if !labels[i] {
            continue;
        }
        for (j, &sj) in scores.iter().enumerate() {
            if labels[j] {
                continue;
            }
            pairs += 1.0;
            if si > sj {
                wins += 1.0;
            } else if si == sj {
                wins += 0.5;
            }
        }
    }
    wins / pairs
}

/// Per-pixel definition: inside roi and above the roi-restricted window
/// mean plus offset.
pub fn adaptive_threshold_oracle(image: &GrayImage, roi: &BinaryMask, window: usize, offset: f64) -> BinaryMask {
    let (w, h) = (image.width() as i64, image.height() as i64);
    let r = (window / 2) as i64;
    BinaryMask::from_fn(image.width(), image.height(), |x, y| {
        if !roi.get(x, y) {
            return false;
        }
        let (mut sum, mut n) = (0.0, 0.0);
        for qy in (y as i64 - r)..=(y as i64 + r) {
            for qx in (x as i64 - r)..=(x as i64 + r) {
                if qx >= 0 && qy >= 0 && qx < w && qy < h && roi.get(qx as usize, qy as usize) {
                    sum += f64::from(image.get(qx as usize, qy as usize));
                    n += 1.0;
                }
            }
        }
        f64::from(image.get(x, y)) > sum / n + offset
    })
}

/// Epochs of training (counted from 1) after which `metric` first reaches
/// `target`; `curve.len() + 1` if it never does.
pub fn epochs_to_reach(curve: &[f64], target: f64) -> usize {
    curve.iter().position(|&m| m >= target).map_or(curve.len() + 1, |i| i + 1)
}

pub mod grad;
