use super::mask::{check_dims, BinaryMask};
use crate::error::{invalid, Result};
use crate::imaging::GrayImage;
use crate::tensor::Tensor;

pub const DEFAULT_WINDOW: usize = 15;
pub const DEFAULT_OFFSET: f64 = 5.0;
pub const DEFAULT_THRESHOLD: f64 = 0.5;

/// Sets pixels whose probability is strictly above `threshold`.
pub fn binarize(prob_map: &Tensor, threshold: f64) -> Result<BinaryMask> {
    let (h, w) = match prob_map.shape() {
        [1, h, w] | [h, w] => (*h, *w),
        other => return Err(invalid(format!("binarize expects [1,H,W] or [H,W], got {other:?}"))),
    };
    BinaryMask::new(w, h, prob_map.data().iter().map(|&p| p > threshold).collect())
}

/// Zeroes every pixel outside `mask`.
pub fn apply_mask(image: &GrayImage, mask: &BinaryMask) -> Result<GrayImage> {
    check_dims("image/mask", (image.width(), image.height()), mask.dims())?;
    let pixels = image.pixels().iter().zip(mask.pixels()).map(|(&p, &m)| if m { p } else { 0 }).collect();
    GrayImage::new(image.width(), image.height(), pixels)
}

/// Summed-area table with a zero top row and left column.
struct Integral {
    stride: usize,
    sums: Vec<u64>,
}

impl Integral {
    fn new(width: usize, height: usize, value: impl Fn(usize) -> u64) -> Self {
        let stride = width + 1;
        let mut sums = vec![0u64; stride * (height + 1)];
        for y in 0..height {
            let mut row = 0u64;
            for x in 0..width {
                row += value(y * width + x);
                sums[(y + 1) * stride + x + 1] = sums[y * stride + x + 1] + row;
            }
        }
        Self { stride, sums }
    }

    /// Sum over the half-open rectangle `[x0, x1) × [y0, y1)`.
    fn rect(&self, x0: usize, y0: usize, x1: usize, y1: usize) -> u64 {
        let s = self.stride;
        self.sums[y1 * s + x1] + self.sums[y0 * s + x0] - self.sums[y0 * s + x1] - self.sums[y1 * s + x0]
    }
}

/// Local-mean thresholding restricted to `roi`.
///
/// A pixel inside `roi` is set when its value exceeds `mean + offset`, where
/// the mean runs over the roi pixels of the `window × window` neighbourhood
/// clipped at the image border.
pub fn adaptive_threshold(image: &GrayImage, roi: &BinaryMask, window: usize, offset: f64) -> Result<BinaryMask> {
    if window < 3 || window.is_multiple_of(2) {
        return Err(invalid(format!("adaptive threshold window {window} must be odd and at least 3")));
    }
    let (w, h) = (image.width(), image.height());
    check_dims("image/roi", (w, h), roi.dims())?;
    let px = image.pixels();
    let inside = roi.pixels();
    let values = Integral::new(w, h, |i| if inside[i] { u64::from(px[i]) } else { 0 });
    let counts = Integral::new(w, h, |i| u64::from(inside[i]));
    let r = window / 2;
    Ok(BinaryMask::from_fn(w, h, |x, y| {
        if !inside[y * w + x] {
            return false;
        }
        let (x0, y0) = (x.saturating_sub(r), y.saturating_sub(r));
        let (x1, y1) = ((x + r + 1).min(w), (y + r + 1).min(h));
        let mean = values.rect(x0, y0, x1, y1) as f64 / counts.rect(x0, y0, x1, y1) as f64;
        f64::from(px[y * w + x]) > mean + offset
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binarize_is_strict() {
        let t = Tensor::new(vec![1, 1, 3], vec![0.4, 0.5, 0.6]).unwrap();
        assert_eq!(binarize(&t, 0.5).unwrap().pixels(), &[false, false, true]);
        let all = Tensor::full(&[1, 2, 2], 0.9);
        assert_eq!(binarize(&all, 0.5).unwrap().count(), 4);
    }

    #[test]
    fn apply_mask_cases() {
        let img = GrayImage::from_fn(4, 2, |x, y| (x + 4 * y + 1) as u8);
        assert_eq!(apply_mask(&img, &BinaryMask::full(4, 2)).unwrap(), img);
        assert!(apply_mask(&img, &BinaryMask::empty(4, 2)).unwrap().pixels().iter().all(|&p| p == 0));
        let half = apply_mask(&img, &BinaryMask::from_fn(4, 2, |x, _| x < 2)).unwrap();
        assert_eq!(half.pixels(), &[1, 2, 0, 0, 5, 6, 0, 0]);
        assert!(apply_mask(&img, &BinaryMask::full(2, 4)).is_err());
    }

    #[test]
    fn uniform_image_has_no_foreground() {
        let img = GrayImage::filled(20, 20, 90);
        let m = adaptive_threshold(&img, &BinaryMask::full(20, 20), 15, 5.0).unwrap();
        assert!(m.is_empty());
    }

    #[test]
    fn bright_square_detected() {
        let img =
            GrayImage::from_fn(24, 24, |x, y| if (10..14).contains(&x) && (10..14).contains(&y) { 200 } else { 50 });
        let m = adaptive_threshold(&img, &BinaryMask::full(24, 24), 15, 5.0).unwrap();
        assert_eq!(m, BinaryMask::from_fn(24, 24, |x, y| (10..14).contains(&x) && (10..14).contains(&y)));
    }

    #[test]
    fn rejects_even_window() {
        let img = GrayImage::filled(4, 4, 0);
        assert!(adaptive_threshold(&img, &BinaryMask::full(4, 4), 4, 5.0).is_err());
        assert!(adaptive_threshold(&img, &BinaryMask::full(4, 4), 1, 5.0).is_err());
    }
}
