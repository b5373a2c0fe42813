use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::mask::BinaryMask;
use crate::error::{invalid, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum Connectivity {
    Four,
    #[default]
    Eight,
}

impl Connectivity {
    pub fn from_neighbours(n: usize) -> Result<Self> {
        match n {
            4 => Ok(Self::Four),
            8 => Ok(Self::Eight),
            _ => Err(invalid(format!("connectivity must be 4 or 8, got {n}"))),
        }
    }

    fn offsets(self) -> &'static [(isize, isize)] {
        match self {
            Self::Four => &[(0, -1), (-1, 0), (1, 0), (0, 1)],
            Self::Eight => &[(-1, -1), (0, -1), (1, -1), (-1, 0), (1, 0), (-1, 1), (0, 1), (1, 1)],
        }
    }
}

/// Inclusive pixel bounds.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub min_x: usize,
    pub min_y: usize,
    pub max_x: usize,
    pub max_y: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Region {
    pub id: usize,
    pub pixel_count: usize,
    pub bbox: BoundingBox,
    /// Flat row-major indices, ascending.
    pub pixels: Vec<usize>,
}

/// Labels connected foreground regions.
///
/// Regions come back largest first; equal sizes are ordered by the
/// bounding-box top-left corner in row-major order, then by first pixel.
/// `id` is the position in that order.
pub fn connected_components(mask: &BinaryMask, connectivity: Connectivity) -> Vec<Region> {
    let (w, h) = mask.dims();
    let mut seen = vec![false; w * h];
    let mut regions = Vec::new();
    let mut queue = VecDeque::new();
    for start in 0..w * h {
        if seen[start] || !mask.pixels()[start] {
            continue;
        }
        seen[start] = true;
        queue.push_back(start);
        let mut pixels = Vec::new();
        let mut bbox = BoundingBox { min_x: usize::MAX, min_y: usize::MAX, max_x: 0, max_y: 0 };
        while let Some(p) = queue.pop_front() {
            let (x, y) = (p % w, p / w);
            pixels.push(p);
            bbox.min_x = bbox.min_x.min(x);
            bbox.min_y = bbox.min_y.min(y);
            bbox.max_x = bbox.max_x.max(x);
            bbox.max_y = bbox.max_y.max(y);
            for &(dx, dy) in connectivity.offsets() {
                let (nx, ny) = (x as isize + dx, y as isize + dy);
                if !mask.get_or_false(nx, ny) {
                    continue;
                }
                let q = ny as usize * w + nx as usize;
                if !seen[q] {
                    seen[q] = true;
                    queue.push_back(q);
                }
            }
        }
        pixels.sort_unstable();
        regions.push(Region { id: 0, pixel_count: pixels.len(), bbox, pixels });
    }
    regions.sort_by(|a, b| {
        b.pixel_count
            .cmp(&a.pixel_count)
            .then((a.bbox.min_y, a.bbox.min_x).cmp(&(b.bbox.min_y, b.bbox.min_x)))
            .then(a.pixels[0].cmp(&b.pixels[0]))
    });
    for (i, r) in regions.iter_mut().enumerate() {
        r.id = i;
    }
    regions
}

/// Union of the `k` largest regions (all of them if fewer exist). Expects
/// regions in the order produced by [`connected_components`].
pub fn select_largest(regions: &[Region], k: usize, width: usize, height: usize) -> BinaryMask {
    let mut out = BinaryMask::empty(width, height);
    let mut order: Vec<&Region> = regions.iter().collect();
    order.sort_by_key(|r| r.id);
    for r in order.into_iter().take(k) {
        for &p in &r.pixels {
            out.set(p % width, p / width, true);
        }
    }
    out
}
