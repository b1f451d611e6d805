//! 8-neighbor local binary patterns.

use super::image::GrayImage;
use super::PATCH_SIZE;
use crate::error::Result;

pub const LBP_BINS: usize = 256;

/// Neighbor offsets `(dy, dx)`, clockwise from the top-left; neighbor `k` sets bit `k`.
pub const NEIGHBORS: [(i64, i64); 8] = [(-1, -1), (-1, 0), (-1, 1), (0, 1), (1, 1), (1, 0), (1, -1), (0, -1)];

/// Code of interior pixel `(x, y)`; a neighbor at least as bright as the center sets its bit.
pub fn lbp_code(patch: &GrayImage, x: usize, y: usize) -> u8 {
    let center = patch.get(x, y);
    let mut code = 0u8;
    for (k, (dy, dx)) in NEIGHBORS.iter().enumerate() {
        let v = patch.get((x as i64 + dx) as usize, (y as i64 + dy) as usize);
        if v >= center {
            code |= 1 << k;
        }
    }
    code
}

/// Histogram of codes over the `126×126` interior pixels (raw counts).
pub fn lbp_histogram(patch: &GrayImage) -> Result<Vec<f64>> {
    patch.check_size(PATCH_SIZE, "LBP")?;
    let mut hist = vec![0.0; LBP_BINS];
    for y in 1..PATCH_SIZE - 1 {
        for x in 1..PATCH_SIZE - 1 {
            hist[lbp_code(patch, x, y) as usize] += 1.0;
        }
    }
    Ok(hist)
}
