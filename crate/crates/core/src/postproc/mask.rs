use crate::error::{invalid, shape_err, Result};
use crate::imaging::GrayImage;
use crate::tensor::Tensor;

/// Row-major boolean raster.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct BinaryMask {
    width: usize,
    height: usize,
    pixels: Vec<bool>,
}

impl std::fmt::Debug for BinaryMask {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "BinaryMask {}x{} ({} set)", self.width, self.height, self.count())?;
        for row in self.pixels.chunks(self.width) {
            let line: String = row.iter().map(|&b| if b { '#' } else { '.' }).collect();
            writeln!(f, "{line}")?;
        }
        Ok(())
    }
}

impl BinaryMask {
    pub fn new(width: usize, height: usize, pixels: Vec<bool>) -> Result<Self> {
        if width == 0 || height == 0 || pixels.len() != width * height {
            return Err(shape_err(format!(
                "mask {width}x{height} needs {} pixels, got {}",
                width * height,
                pixels.len()
            )));
        }
        Ok(Self { width, height, pixels })
    }

    pub fn empty(width: usize, height: usize) -> Self {
        Self::new(width, height, vec![false; width * height]).expect("positive dims")
    }

    pub fn full(width: usize, height: usize) -> Self {
        Self::new(width, height, vec![true; width * height]).expect("positive dims")
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> bool) -> Self {
        let pixels = (0..height).flat_map(|y| (0..width).map(move |x| (x, y))).map(|(x, y)| f(x, y)).collect();
        Self::new(width, height, pixels).expect("positive dims")
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn pixels(&self) -> &[bool] {
        &self.pixels
    }

    pub fn get(&self, x: usize, y: usize) -> bool {
        self.pixels[y * self.width + x]
    }

    /// Out-of-bounds coordinates read as `false`.
    pub fn get_or_false(&self, x: isize, y: isize) -> bool {
        x >= 0 && y >= 0 && (x as usize) < self.width && (y as usize) < self.height && self.get(x as usize, y as usize)
    }

    pub fn set(&mut self, x: usize, y: usize, v: bool) {
        self.pixels[y * self.width + x] = v;
    }

    pub fn count(&self) -> usize {
        self.pixels.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.pixels.contains(&true)
    }

    pub fn complement(&self) -> Self {
        Self { width: self.width, height: self.height, pixels: self.pixels.iter().map(|b| !b).collect() }
    }

    fn zip_with(&self, other: &Self, f: impl Fn(bool, bool) -> bool) -> Result<Self> {
        self.check_same_dims(other)?;
        let pixels = self.pixels.iter().zip(&other.pixels).map(|(&a, &b)| f(a, b)).collect();
        Ok(Self { width: self.width, height: self.height, pixels })
    }

    pub fn intersect(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a && b)
    }

    pub fn union(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a || b)
    }

    pub fn is_subset_of(&self, other: &Self) -> bool {
        self.dims() == other.dims() && self.pixels.iter().zip(&other.pixels).all(|(&a, &b)| !a || b)
    }

    pub(crate) fn check_same_dims(&self, other: &Self) -> Result<()> {
        check_dims("mask", self.dims(), other.dims())
    }

    /// 0/255 grayscale rendering, used to persist masks as PGM.
    pub fn to_gray(&self) -> GrayImage {
        GrayImage::new(self.width, self.height, self.pixels.iter().map(|&b| if b { 255 } else { 0 }).collect())
            .expect("same dims")
    }

    /// Pixels at or above 128 are set.
    pub fn from_gray(image: &GrayImage) -> Self {
        Self {
            width: image.width(),
            height: image.height(),
            pixels: image.pixels().iter().map(|&p| p >= 128).collect(),
        }
    }

    /// `[1, H, W]` tensor of zeros and ones.
    pub fn to_tensor(&self) -> Tensor {
        let data = self.pixels.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
        Tensor::new(vec![1, self.height, self.width], data).expect("same dims")
    }
}

pub(crate) fn check_dims(what: &str, a: (usize, usize), b: (usize, usize)) -> Result<()> {
    if a != b {
        return Err(shape_err(format!("{what} dimensions {}x{} and {}x{} differ", a.0, a.1, b.0, b.1)));
    }
    Ok(())
}

/// Odd square structuring element anchored at its centre.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StructuringElement {
    side: usize,
    cells: Vec<bool>,
}

impl Default for StructuringElement {
    fn default() -> Self {
        Self::square(3).expect("3 is odd")
    }
}

impl StructuringElement {
    pub fn square(side: usize) -> Result<Self> {
        Self::new(side, vec![true; side * side])
    }

    pub fn new(side: usize, cells: Vec<bool>) -> Result<Self> {
        if side == 0 || side.is_multiple_of(2) {
            return Err(invalid(format!("structuring element side {side} must be odd and positive")));
        }
        if cells.len() != side * side {
            return Err(invalid(format!("structuring element needs {} cells", side * side)));
        }
        Ok(Self { side, cells })
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn radius(&self) -> usize {
        self.side / 2
    }

    /// `(dx, dy)` offsets of the active cells relative to the anchor.
    pub fn offsets(&self) -> Vec<(isize, isize)> {
        let r = self.radius() as isize;
        (0..self.side)
            .flat_map(|y| (0..self.side).map(move |x| (x, y)))
            .filter(|&(x, y)| self.cells[y * self.side + x])
            .map(|(x, y)| (x as isize - r, y as isize - r))
            .collect()
    }
}
