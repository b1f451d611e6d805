//! Grayscale images and binary PGM (P5) I/O.

use std::path::Path;

use crate::error::{Error, Result};

/// Row-major grayscale image with `f64` intensities.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::Dimension(format!(
                "{}x{} image needs {} pixels, got {}",
                width,
                height,
                width * height,
                data.len()
            )));
        }
        Ok(GrayImage { width, height, data })
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        GrayImage {
            width,
            height,
            data: vec![0.0; width * height],
        }
    }

    /// `f(x, y)` for every pixel.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        GrayImage { width, height, data }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, v: f64) {
        self.data[y * self.width + x] = v;
    }

    /// Pixel value, or 0 outside the image.
    pub fn get_or_zero(&self, x: i64, y: i64) -> f64 {
        if x < 0 || y < 0 || x as usize >= self.width || y as usize >= self.height {
            0.0
        } else {
            self.get(x as usize, y as usize)
        }
    }

    pub(crate) fn check_size(&self, size: usize, what: &str) -> Result<()> {
        if self.width != size || self.height != size {
            return Err(Error::Dimension(format!(
                "{what} expects a {size}x{size} patch, got {}x{}",
                self.width, self.height
            )));
        }
        Ok(())
    }

    pub fn parse_pgm(bytes: &[u8]) -> Result<Self> {
        let mut pos = 0;
        let mut token = || -> Result<String> {
            // whitespace and '#' comments separate header tokens
            loop {
                match bytes.get(pos) {
                    Some(b'#') => {
                        while let Some(&c) = bytes.get(pos) {
                            pos += 1;
                            if c == b'\n' || c == b'\r' {
                                break;
                            }
                        }
                    }
                    Some(c) if c.is_ascii_whitespace() => pos += 1,
                    Some(_) => break,
                    None => return Err(Error::Parse("PGM header ended early".into())),
                }
            }
            let start = pos;
            while bytes.get(pos).is_some_and(|c| !c.is_ascii_whitespace() && *c != b'#') {
                pos += 1;
            }
            Ok(String::from_utf8_lossy(&bytes[start..pos]).into_owned())
        };
        let magic = token()?;
        if magic != "P5" {
            return Err(Error::Parse(format!("expected binary PGM magic P5, found {magic:?}")));
        }
        let mut number = |name: &str| -> Result<usize> {
            let t = token()?;
            t.parse()
                .map_err(|_| Error::Parse(format!("PGM {name} is not a number: {t:?}")))
        };
        let width = number("width")?;
        let height = number("height")?;
        let maxval = number("maxval")?;
        if width == 0 || height == 0 {
            return Err(Error::Parse(format!("PGM has empty size {width}x{height}")));
        }
        if maxval == 0 || maxval > 65535 {
            return Err(Error::Parse(format!("PGM maxval {maxval} is outside 1..=65535")));
        }
        // exactly one whitespace byte separates the header from the raster
        pos += 1;
        let depth = if maxval < 256 { 1 } else { 2 };
        let need = width * height * depth;
        let raster = bytes
            .get(pos..pos + need)
            .ok_or_else(|| Error::Parse(format!("PGM raster truncated: need {need} bytes")))?;
        let data = if depth == 1 {
            raster.iter().map(|&b| b as f64).collect()
        } else {
            raster
                .chunks_exact(2)
                .map(|c| u16::from_be_bytes([c[0], c[1]]) as f64)
                .collect()
        };
        GrayImage::new(width, height, data)
    }

    pub fn read_pgm(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::parse_pgm(&bytes).map_err(|e| match e {
            Error::Parse(msg) => Error::Parse(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    /// 8-bit P5 encoding; intensities are rounded and clamped to `0..=255`.
    pub fn to_pgm(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend(self.data.iter().map(|v| v.round().clamp(0.0, 255.0) as u8));
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pgm_round_trip() {
        let img = GrayImage::from_fn(5, 3, |x, y| (x * 40 + y * 7) as f64);
        let parsed = GrayImage::parse_pgm(&img.to_pgm()).unwrap();
        assert_eq!(parsed, img);
    }

    #[test]
    fn header_comments_and_sixteen_bit() {
        let mut bytes = b"P5 # comment\n2 1\n# another\n1000\n".to_vec();
        bytes.extend_from_slice(&[0x03, 0xE8, 0x00, 0x01]);
        let img = GrayImage::parse_pgm(&bytes).unwrap();
        assert_eq!(img.pixels(), &[1000.0, 1.0]);
    }

    #[test]
    fn malformed_rejected() {
        assert!(GrayImage::parse_pgm(b"P2\n1 1\n255\n0").is_err());
        assert!(GrayImage::parse_pgm(b"P5\n2 2\n255\n\x00\x01").is_err());
        assert!(GrayImage::parse_pgm(b"P5\n0 2\n255\n").is_err());
        assert!(GrayImage::new(2, 2, vec![0.0; 3]).is_err());
    }
}
