//! Grayscale image fields loaded from binary PGM.

use std::path::Path;

use thiserror::Error;

use super::ScalarField;
use crate::rect::Rect;

#[derive(Debug, Error)]
pub enum ImageError {
    #[error("io error reading {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("malformed PGM: {0}")]
    Format(String),
}

/// Grayscale grid spread over a world rectangle, mapped into `[lo, hi]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageField {
    width: usize,
    height: usize,
    texels: Vec<f64>,
    rect: Rect,
    lo: f64,
    hi: f64,
}

impl ImageField {
    /// `texels` are row-major values in `[0,1]`; row 0 lies at `rect.y0`.
    pub fn new(
        width: usize,
        height: usize,
        texels: Vec<f64>,
        rect: Rect,
        lo: f64,
        hi: f64,
    ) -> Self {
        assert!(width > 0 && height > 0 && texels.len() == width * height);
        ImageField {
            width,
            height,
            texels,
            rect,
            lo,
            hi,
        }
    }

    pub fn from_pgm(bytes: &[u8], rect: Rect, lo: f64, hi: f64) -> Result<Self, ImageError> {
        let (width, height, maxval, data) = parse_pgm(bytes)?;
        let texels = data.iter().map(|&b| b as f64 / maxval as f64).collect();
        Ok(ImageField::new(width, height, texels, rect, lo, hi))
    }

    pub fn load(path: &Path, rect: Rect, lo: f64, hi: f64) -> Result<Self, ImageError> {
        let bytes = std::fs::read(path).map_err(|source| ImageError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_pgm(&bytes, rect, lo, hi)
    }

    pub fn dimensions(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    /// Bilinear sample, clamped to the edge texels outside the rectangle.
    pub fn sample(&self, x: f64, y: f64) -> f64 {
        let tx = ((x - self.rect.x0) / self.rect.width() * self.width as f64 - 0.5)
            .clamp(0.0, (self.width - 1) as f64);
        let ty = ((y - self.rect.y0) / self.rect.height() * self.height as f64 - 0.5)
            .clamp(0.0, (self.height - 1) as f64);
        let (c0, r0) = (tx.floor() as usize, ty.floor() as usize);
        let (c1, r1) = ((c0 + 1).min(self.width - 1), (r0 + 1).min(self.height - 1));
        let (fx, fy) = (tx - c0 as f64, ty - r0 as f64);
        let at = |c: usize, r: usize| self.texels[r * self.width + c];
        let top = at(c0, r0) + (at(c1, r0) - at(c0, r0)) * fx;
        let bottom = at(c0, r1) + (at(c1, r1) - at(c0, r1)) * fx;
        let v = top + (bottom - top) * fy;
        self.lo + (self.hi - self.lo) * v
    }
}

impl ScalarField for ImageField {
    fn value(&self, x: f64, y: f64, _t: f64) -> f64 {
        self.sample(x, y)
    }
}

// Binary graymap: "P5", width, height, maxval (<= 255), one whitespace byte,
// then width*height samples. Comments start with '#'.
fn parse_pgm(bytes: &[u8]) -> Result<(usize, usize, u32, &[u8]), ImageError> {
    let fail = |m: &str| ImageError::Format(m.to_string());
    if bytes.len() < 2 || &bytes[..2] != b"P5" {
        return Err(fail("missing P5 magic number"));
    }
    let mut pos = 2;
    let mut header = [0u32; 3];
    for value in header.iter_mut() {
        loop {
            match bytes.get(pos) {
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(b'#') => {
                    while pos < bytes.len() && bytes[pos] != b'\n' {
                        pos += 1;
                    }
                }
                _ => break,
            }
        }
        let start = pos;
        while pos < bytes.len() && bytes[pos].is_ascii_digit() {
            pos += 1;
        }
        *value = std::str::from_utf8(&bytes[start..pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| fail("invalid header number"))?;
    }
    let [width, height, maxval] = header;
    if width == 0 || height == 0 {
        return Err(fail("zero dimension"));
    }
    if maxval == 0 || maxval > 255 {
        return Err(fail("only 8-bit maxval (1..=255) is supported"));
    }
    if !bytes.get(pos).is_some_and(|b| b.is_ascii_whitespace()) {
        return Err(fail("missing whitespace after header"));
    }
    pos += 1;
    let n = width as usize * height as usize;
    let data = bytes
        .get(pos..pos + n)
        .ok_or_else(|| fail("truncated pixel data"))?;
    Ok((width as usize, height as usize, maxval, data))
}
