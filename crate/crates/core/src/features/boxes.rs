//! Face box plus its four neighbors, resampled to fixed-size patches.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::image::GrayImage;
use super::PATCH_SIZE;
use crate::error::{Error, Result};

/// Axis-aligned rectangle in pixels; serialized as `[x, y, w, h]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "[i64; 4]", into = "[i64; 4]")]
pub struct Rect {
    pub x: i64,
    pub y: i64,
    pub w: i64,
    pub h: i64,
}

impl From<[i64; 4]> for Rect {
    fn from([x, y, w, h]: [i64; 4]) -> Self {
        Rect { x, y, w, h }
    }
}

impl From<Rect> for [i64; 4] {
    fn from(r: Rect) -> Self {
        [r.x, r.y, r.w, r.h]
    }
}

impl Rect {
    pub fn new(x: i64, y: i64, w: i64, h: i64) -> Self {
        Rect { x, y, w, h }
    }

    pub fn validate(&self) -> Result<()> {
        if self.w <= 0 || self.h <= 0 {
            return Err(Error::Validation(format!(
                "box [{}, {}, {}, {}] has no area",
                self.x, self.y, self.w, self.h
            )));
        }
        Ok(())
    }
}

/// The face box and four equally sized boxes flush against its sides.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoxLayout {
    pub face: Rect,
    pub above: Rect,
    pub below: Rect,
    pub left: Rect,
    pub right: Rect,
}

impl BoxLayout {
    pub fn around(face: Rect) -> Result<Self> {
        face.validate()?;
        let Rect { x, y, w, h } = face;
        Ok(BoxLayout {
            face,
            above: Rect::new(x, y - h, w, h),
            below: Rect::new(x, y + h, w, h),
            left: Rect::new(x - w, y, w, h),
            right: Rect::new(x + w, y, w, h),
        })
    }

    /// Face, above, below, left, right.
    pub fn rects(&self) -> [Rect; 5] {
        [self.face, self.above, self.below, self.left, self.right]
    }
}

/// Bilinear resample of `rect` to `size×size`, reading zeros outside the image.
///
/// Output pixel centers map onto the rectangle's pixel grid, so a rectangle
/// of exactly `size` copies pixels and one of `2·size` averages 2×2 blocks.
pub fn resample(image: &GrayImage, rect: Rect, size: usize) -> Result<GrayImage> {
    rect.validate()?;
    let sx = rect.w as f64 / size as f64;
    let sy = rect.h as f64 / size as f64;
    let sample = |fx: f64, fy: f64| -> f64 {
        let x0 = fx.floor();
        let y0 = fy.floor();
        let tx = fx - x0;
        let ty = fy - y0;
        let (x0, y0) = (x0 as i64, y0 as i64);
        let mut v = (1.0 - tx) * (1.0 - ty) * image.get_or_zero(x0, y0);
        if tx > 0.0 {
            v += tx * (1.0 - ty) * image.get_or_zero(x0 + 1, y0);
        }
        if ty > 0.0 {
            v += (1.0 - tx) * ty * image.get_or_zero(x0, y0 + 1);
            if tx > 0.0 {
                v += tx * ty * image.get_or_zero(x0 + 1, y0 + 1);
            }
        }
        v
    };
    Ok(GrayImage::from_fn(size, size, |i, j| {
        let fx = rect.x as f64 + (i as f64 + 0.5) * sx - 0.5;
        let fy = rect.y as f64 + (j as f64 + 0.5) * sy - 0.5;
        sample(fx, fy)
    }))
}

/// Five `128×128` patches in [`BoxLayout::rects`] order.
pub fn extract_boxes(image: &GrayImage, face: Rect) -> Result<Vec<GrayImage>> {
    let layout = BoxLayout::around(face)?;
    layout.rects().iter().map(|r| resample(image, *r, PATCH_SIZE)).collect()
}

/// Per-image sidecar: `{"face_box": [x, y, w, h]}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FaceBoxFile {
    pub face_box: Rect,
}

impl FaceBoxFile {
    pub fn load(path: &Path) -> Result<Rect> {
        let file: FaceBoxFile = crate::io::read_json(path)?;
        file.face_box.validate()?;
        Ok(file.face_box)
    }
}

/// Image file name → face box, for a whole directory at once.
pub type BoxTable = BTreeMap<String, Rect>;

pub fn load_box_table(path: &Path) -> Result<BoxTable> {
    let table: BoxTable = crate::io::read_json(path)?;
    for (name, rect) in &table {
        rect.validate()
            .map_err(|e| Error::Validation(format!("{}: box for {name:?}: {e}", path.display())))?;
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(w: usize, h: usize) -> GrayImage {
        GrayImage::from_fn(w, h, |x, y| ((x * 31 + y * 17) % 251) as f64)
    }

    #[test]
    fn identity_resample_copies_pixels() {
        let img = ramp(300, 200);
        let patch = resample(&img, Rect::new(40, 30, 128, 128), 128).unwrap();
        for j in 0..128 {
            for i in 0..128 {
                assert_eq!(patch.get(i, j), img.get(40 + i, 30 + j));
            }
        }
    }

    #[test]
    fn neighbors_are_flush_and_equal_sized() {
        let l = BoxLayout::around(Rect::new(10, 20, 30, 40)).unwrap();
        for r in l.rects() {
            assert_eq!((r.w, r.h), (30, 40));
        }
        assert_eq!(l.above.y + l.above.h, l.face.y);
        assert_eq!(l.below.y, l.face.y + l.face.h);
        assert_eq!(l.left.x + l.left.w, l.face.x);
        assert_eq!(l.right.x, l.face.x + l.face.w);
    }

    #[test]
    fn corner_face_zero_pads_neighbors() {
        let img = GrayImage::from_fn(256, 256, |_, _| 100.0);
        let patches = extract_boxes(&img, Rect::new(0, 0, 128, 128)).unwrap();
        // above and left lie entirely outside
        assert!(patches[1].pixels().iter().all(|v| *v == 0.0));
        assert!(patches[3].pixels().iter().all(|v| *v == 0.0));
        assert!(patches[0].pixels().iter().all(|v| *v == 100.0));
        // a half-outside box is half zero
        let half = resample(&img, Rect::new(-64, 0, 128, 128), 128).unwrap();
        assert_eq!(half.get(0, 5), 0.0);
        assert_eq!(half.get(127, 5), 100.0);
    }

    #[test]
    fn degenerate_box_rejected() {
        let img = ramp(10, 10);
        assert!(extract_boxes(&img, Rect::new(0, 0, 0, 5)).is_err());
        assert!(resample(&img, Rect::new(0, 0, 5, -1), 4).is_err());
    }

    #[test]
    fn sidecar_parses_array_form() {
        let f: FaceBoxFile = serde_json::from_str(r#"{"face_box": [1, 2, 3, 4]}"#).unwrap();
        assert_eq!(f.face_box, Rect::new(1, 2, 3, 4));
    }
}
