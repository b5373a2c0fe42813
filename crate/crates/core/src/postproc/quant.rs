use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::mask::BinaryMask;
use crate::error::{invalid, Result};
use crate::imaging::{GrayImage, RgbImage};

/// Infected share of the lung area, truncated to hundredths of a percent.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct InfectionReport {
    pub lung_pixels: usize,
    pub infected_pixels: usize,
    /// Percentage times 100, e.g. `3352` for 33.52 %.
    pub hundredths: u64,
    /// No lung pixels; the percentage is reported as zero.
    pub degenerate: bool,
}

impl InfectionReport {
    pub fn from_counts(lung_pixels: usize, infected_pixels: usize) -> Result<Self> {
        if infected_pixels > lung_pixels {
            return Err(invalid(format!("{infected_pixels} infected pixels exceed {lung_pixels} lung pixels")));
        }
        let hundredths = if lung_pixels == 0 { 0 } else { (10_000 * infected_pixels as u64) / lung_pixels as u64 };
        Ok(Self { lung_pixels, infected_pixels, hundredths, degenerate: lung_pixels == 0 })
    }

    pub fn percent(&self) -> f64 {
        self.hundredths as f64 / 100.0
    }

    pub fn percent_string(&self) -> String {
        format!("{}.{:02}", self.hundredths / 100, self.hundredths % 100)
    }
}

impl fmt::Display for InfectionReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}% ({} of {} lung pixels)", self.percent_string(), self.infected_pixels, self.lung_pixels)
    }
}

#[derive(Serialize, Deserialize)]
struct ReportRecord {
    lung_pixels: usize,
    infected_pixels: usize,
    percent: String,
    degenerate: bool,
}

impl Serialize for InfectionReport {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        ReportRecord {
            lung_pixels: self.lung_pixels,
            infected_pixels: self.infected_pixels,
            percent: self.percent_string(),
            degenerate: self.degenerate,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for InfectionReport {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let r = ReportRecord::deserialize(d)?;
        let report = Self::from_counts(r.lung_pixels, r.infected_pixels).map_err(serde::de::Error::custom)?;
        if report.percent_string() != r.percent || report.degenerate != r.degenerate {
            return Err(serde::de::Error::custom(format!(
                "percent {} inconsistent with {} of {} pixels",
                r.percent, r.infected_pixels, r.lung_pixels
            )));
        }
        Ok(report)
    }
}

/// Counts `infected ∩ lung` against `lung`.
pub fn infection_percentage(lung: &BinaryMask, infected: &BinaryMask) -> Result<InfectionReport> {
    let inside = infected.intersect(lung)?;
    InfectionReport::from_counts(lung.count(), inside.count())
}

/// Grayscale replicated to RGB, with infected pixels averaged against pure red.
pub fn heatmap_overlay(image: &GrayImage, infected: &BinaryMask) -> Result<RgbImage> {
    super::mask::check_dims("image/mask", (image.width(), image.height()), infected.dims())?;
    let mut pixels = Vec::with_capacity(3 * image.pixels().len());
    for (&g, &hit) in image.pixels().iter().zip(infected.pixels()) {
        if hit {
            let half = g / 2;
            pixels.extend_from_slice(&[((u16::from(g) + 255) / 2) as u8, half, half]);
        } else {
            pixels.extend_from_slice(&[g, g, g]);
        }
    }
    RgbImage::new(image.width(), image.height(), pixels)
}
