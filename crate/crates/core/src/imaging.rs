//! 8-bit image types, binary PGM/PPM codecs, grayscale conversion and
//! nearest-neighbour resizing.

use std::path::Path;

use crate::error::{shape_err, ImageError, Result};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RgbImage {
    width: usize,
    height: usize,
    /// Interleaved `R, G, B` triples, row-major.
    pixels: Vec<u8>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Image {
    Gray(GrayImage),
    Rgb(RgbImage),
}

impl GrayImage {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 || pixels.len() != width * height {
            return Err(shape_err(format!(
                "gray image {width}x{height} needs {} pixels, got {}",
                width * height,
                pixels.len()
            )));
        }
        Ok(Self { width, height, pixels })
    }

    pub fn filled(width: usize, height: usize, value: u8) -> Self {
        Self::new(width, height, vec![value; width * height]).expect("positive dims")
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> u8) -> Self {
        let pixels = (0..height).flat_map(|y| (0..width).map(move |x| (x, y))).map(|(x, y)| f(x, y)).collect();
        Self::new(width, height, pixels).expect("positive dims")
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn pixels_mut(&mut self) -> &mut [u8] {
        &mut self.pixels
    }

    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.pixels[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, v: u8) {
        self.pixels[y * self.width + x] = v;
    }

    pub fn to_pgm(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend_from_slice(&self.pixels);
        out
    }
}

impl RgbImage {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 || pixels.len() != 3 * width * height {
            return Err(shape_err(format!(
                "rgb image {width}x{height} needs {} bytes, got {}",
                3 * width * height,
                pixels.len()
            )));
        }
        Ok(Self { width, height, pixels })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn get(&self, x: usize, y: usize) -> [u8; 3] {
        let i = 3 * (y * self.width + x);
        [self.pixels[i], self.pixels[i + 1], self.pixels[i + 2]]
    }

    pub fn to_ppm(&self) -> Vec<u8> {
        let mut out = format!("P6\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend_from_slice(&self.pixels);
        out
    }
}

pub fn save_image(image: &Image) -> Vec<u8> {
    match image {
        Image::Gray(g) => g.to_pgm(),
        Image::Rgb(c) => c.to_ppm(),
    }
}

struct Header<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Header<'_> {
    fn skip_space_and_comments(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b == b'#' {
                while self.bytes.get(self.pos).is_some_and(|&c| c != b'\n') {
                    self.pos += 1;
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<u32, ImageError> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.bytes.get(self.pos).is_some_and(u8::is_ascii_digit) {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(ImageError::MalformedHeader(format!("expected {what}")));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .expect("ascii digits")
            .parse()
            .map_err(|_| ImageError::MalformedHeader(format!("{what} out of range")))
    }
}

/// Decodes a binary PGM (`P5`) or PPM (`P6`) with maxval 255.
pub fn load_image(bytes: &[u8]) -> Result<Image, ImageError> {
    let magic = bytes.get(..2).unwrap_or(bytes);
    let channels = match magic {
        b"P5" => 1,
        b"P6" => 3,
        _ => return Err(ImageError::BadMagic(String::from_utf8_lossy(magic).into_owned())),
    };
    let mut h = Header { bytes, pos: 2 };
    let width = h.number("width")? as usize;
    let height = h.number("height")? as usize;
    let maxval = h.number("maxval")?;
    if maxval != 255 {
        return Err(ImageError::UnsupportedMaxval(maxval));
    }
    if width == 0 || height == 0 {
        return Err(ImageError::MalformedHeader(format!("zero dimension {width}x{height}")));
    }
    match bytes.get(h.pos) {
        Some(b) if b.is_ascii_whitespace() => h.pos += 1,
        Some(_) => return Err(ImageError::MalformedHeader("missing whitespace after maxval".into())),
        None => return Err(ImageError::Truncated { expected: channels * width * height, found: 0 }),
    }
    let expected = channels * width * height;
    let payload = &bytes[h.pos..];
    if payload.len() < expected {
        return Err(ImageError::Truncated { expected, found: payload.len() });
    }
    let pixels = payload[..expected].to_vec();
    Ok(if channels == 1 {
        Image::Gray(GrayImage { width, height, pixels })
    } else {
        Image::Rgb(RgbImage { width, height, pixels })
    })
}

pub fn read_image(path: impl AsRef<Path>) -> Result<Image> {
    Ok(load_image(&std::fs::read(path)?)?)
}

/// Reads an image file and converts colour images to grayscale.
pub fn read_gray(path: impl AsRef<Path>) -> Result<GrayImage> {
    Ok(match read_image(path)? {
        Image::Gray(g) => g,
        Image::Rgb(c) => to_grayscale(&c),
    })
}

pub fn write_pgm(path: impl AsRef<Path>, image: &GrayImage) -> Result<()> {
    std::fs::write(path, image.to_pgm())?;
    Ok(())
}

pub fn write_ppm(path: impl AsRef<Path>, image: &RgbImage) -> Result<()> {
    std::fs::write(path, image.to_ppm())?;
    Ok(())
}

/// ITU-R BT.601 luminance `0.299R + 0.587G + 0.114B`, rounded half-up.
pub fn to_grayscale(rgb: &RgbImage) -> GrayImage {
    let pixels = rgb
        .pixels
        .chunks_exact(3)
        .map(|p| {
            let weighted = 299 * u32::from(p[0]) + 587 * u32::from(p[1]) + 114 * u32::from(p[2]);
            ((weighted + 500) / 1000) as u8
        })
        .collect();
    GrayImage { width: rgb.width, height: rgb.height, pixels }
}

/// Source index for each of `dst` outputs: `floor((i + 0.5) · src / dst)`.
pub fn nearest_indices(src: usize, dst: usize) -> Vec<usize> {
    (0..dst).map(|i| ((2 * i + 1) * src) / (2 * dst)).collect()
}

/// Nearest-neighbour resampling of a row-major plane with `channels`
/// interleaved values per pixel.
pub fn resize_plane<T: Copy>(
    src: &[T],
    width: usize,
    height: usize,
    channels: usize,
    out_w: usize,
    out_h: usize,
) -> Vec<T> {
    let xs = nearest_indices(width, out_w);
    let ys = nearest_indices(height, out_h);
    let mut out = Vec::with_capacity(out_w * out_h * channels);
    for &sy in &ys {
        for &sx in &xs {
            let i = (sy * width + sx) * channels;
            out.extend_from_slice(&src[i..i + channels]);
        }
    }
    out
}

pub fn resize(image: &GrayImage, out_w: usize, out_h: usize) -> Result<GrayImage> {
    if out_w == 0 || out_h == 0 {
        return Err(shape_err("resize target must be at least 1x1"));
    }
    GrayImage::new(out_w, out_h, resize_plane(&image.pixels, image.width, image.height, 1, out_w, out_h))
}

pub fn resize_rgb(image: &RgbImage, out_w: usize, out_h: usize) -> Result<RgbImage> {
    if out_w == 0 || out_h == 0 {
        return Err(shape_err("resize target must be at least 1x1"));
    }
    RgbImage::new(out_w, out_h, resize_plane(&image.pixels, image.width, image.height, 3, out_w, out_h))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decodes_tiny_pgm() {
        let mut bytes = b"P5\n2 2\n255\n".to_vec();
        bytes.extend_from_slice(&[0, 85, 170, 255]);
        let Image::Gray(g) = load_image(&bytes).unwrap() else { panic!("expected gray") };
        assert_eq!((g.width(), g.height()), (2, 2));
        assert_eq!(g.pixels(), &[0, 85, 170, 255]);
    }

    #[test]
    fn decodes_ppm_with_comments() {
        let mut bytes = b"P6\n# made by hand\n1 1\n255\n".to_vec();
        bytes.extend_from_slice(&[10, 20, 30]);
        let Image::Rgb(c) = load_image(&bytes).unwrap() else { panic!("expected rgb") };
        assert_eq!(c.get(0, 0), [10, 20, 30]);
    }

    #[test]
    fn distinct_decode_errors() {
        assert!(matches!(load_image(b"P2\n1 1\n255\n\0"), Err(ImageError::BadMagic(_))));
        assert!(matches!(load_image(b"P5\n1 1\n65535\n\0\0"), Err(ImageError::UnsupportedMaxval(65535))));
        assert!(matches!(load_image(b"P5\n2 2\n255\n\0\0\0"), Err(ImageError::Truncated { expected: 4, found: 3 })));
        assert!(matches!(load_image(b"P5\nx 2\n255\n"), Err(ImageError::MalformedHeader(_))));
    }

    #[test]
    fn pgm_header_is_pinned() {
        let g = GrayImage::new(3, 2, vec![1, 2, 3, 4, 5, 6]).unwrap();
        let bytes = g.to_pgm();
        assert!(bytes.starts_with(b"P5\n3 2\n255\n"));
        assert_eq!(&bytes[11..], &[1, 2, 3, 4, 5, 6]);
    }

    #[test]
    fn grayscale_weights() {
        let c = RgbImage::new(4, 1, vec![255, 255, 255, 255, 0, 0, 90, 90, 90, 0, 0, 0]).unwrap();
        assert_eq!(to_grayscale(&c).pixels(), &[255, 76, 90, 0]);
    }

    #[test]
    fn resize_checkerboard_uses_odd_sources() {
        let g = GrayImage::from_fn(4, 4, |x, y| (10 * y + x) as u8);
        let r = resize(&g, 2, 2).unwrap();
        for y in 0..2 {
            for x in 0..2 {
                assert_eq!(r.get(x, y), g.get(2 * x + 1, 2 * y + 1));
            }
        }
        assert_eq!(resize(&g, 4, 4).unwrap(), g);
        assert_eq!(resize(&GrayImage::filled(5, 3, 9), 7, 2).unwrap(), GrayImage::filled(7, 2, 9));
    }
}
