//! Histogram of oriented gradients (8×8 cells, 9 unsigned bins, 2×2 blocks, L2-Hys).

use super::image::GrayImage;
use super::PATCH_SIZE;
use crate::error::Result;

pub const CELL: usize = 8;
pub const BINS: usize = 9;
pub const CELLS: usize = PATCH_SIZE / CELL;
pub const BLOCKS: usize = CELLS - 1;
pub const BLOCK_LEN: usize = 4 * BINS;
pub const HOG_DIM: usize = BLOCKS * BLOCKS * BLOCK_LEN;

const BIN_WIDTH: f64 = 180.0 / BINS as f64;
const CLIP: f64 = 0.2;
const NORM_EPS: f64 = 1e-3;

/// Centered differences with replicated borders: `(gx, gy)` at every pixel.
pub fn gradients(patch: &GrayImage) -> (Vec<f64>, Vec<f64>) {
    let (w, h) = (patch.width(), patch.height());
    let mut gx = vec![0.0; w * h];
    let mut gy = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            gx[y * w + x] = patch.get((x + 1).min(w - 1), y) - patch.get(x.saturating_sub(1), y);
            gy[y * w + x] = patch.get(x, (y + 1).min(h - 1)) - patch.get(x, y.saturating_sub(1));
        }
    }
    (gx, gy)
}

/// Magnitude-weighted orientation histograms per cell, `CELLS²×BINS` row-major.
///
/// Bin `k` is centered at `k·20°`; each vote is split linearly between the
/// two nearest centers, wrapping at 180°.
pub fn cell_histograms(patch: &GrayImage) -> Result<Vec<f64>> {
    patch.check_size(PATCH_SIZE, "HOG")?;
    let (gx, gy) = gradients(patch);
    let mut hist = vec![0.0; CELLS * CELLS * BINS];
    for y in 0..PATCH_SIZE {
        for x in 0..PATCH_SIZE {
            let (dx, dy) = (gx[y * PATCH_SIZE + x], gy[y * PATCH_SIZE + x]);
            let mag = dx.hypot(dy);
            if mag == 0.0 {
                continue;
            }
            let angle = dy.atan2(dx).to_degrees().rem_euclid(180.0);
            let pos = angle / BIN_WIDTH;
            let lo = pos.floor();
            let frac = pos - lo;
            let lo = lo as usize % BINS;
            let hi = (lo + 1) % BINS;
            let cell = ((y / CELL) * CELLS + x / CELL) * BINS;
            hist[cell + lo] += mag * (1.0 - frac);
            hist[cell + hi] += mag * frac;
        }
    }
    Ok(hist)
}

fn l2_hys(block: &mut [f64]) {
    let scale = |b: &mut [f64]| {
        let n = (b.iter().map(|v| v * v).sum::<f64>() + NORM_EPS * NORM_EPS).sqrt();
        b.iter_mut().for_each(|v| *v /= n);
    };
    scale(block);
    block.iter_mut().for_each(|v| *v = v.min(CLIP));
    scale(block);
}

/// 8,100-dim descriptor: 15×15 overlapping blocks of 2×2 cells, each
/// L2-Hys normalized, ordered block row, block column, cell (row-major), bin.
pub fn hog_features(patch: &GrayImage) -> Result<Vec<f64>> {
    let cells = cell_histograms(patch)?;
    let mut out = Vec::with_capacity(HOG_DIM);
    for by in 0..BLOCKS {
        for bx in 0..BLOCKS {
            let start = out.len();
            for (cy, cx) in [(by, bx), (by, bx + 1), (by + 1, bx), (by + 1, bx + 1)] {
                let c = (cy * CELLS + cx) * BINS;
                out.extend_from_slice(&cells[c..c + BINS]);
            }
            l2_hys(&mut out[start..]);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn dimension_and_constant_patch() {
        let h = hog_features(&GrayImage::from_fn(PATCH_SIZE, PATCH_SIZE, |_, _| 77.0)).unwrap();
        assert_eq!(h.len(), 8100);
        assert!(h.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn block_norms_bounded() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let p = GrayImage::from_fn(PATCH_SIZE, PATCH_SIZE, |_, _| rng.random_range(0.0..255.0));
        let h = hog_features(&p).unwrap();
        for block in h.chunks_exact(BLOCK_LEN) {
            let n = block.iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!(n <= 1.0 + 1e-6);
            assert!(block.iter().all(|v| *v >= 0.0 && *v <= 1.0));
        }
    }

    #[test]
    fn vertical_step_edge_votes_into_horizontal_gradient_bin() {
        let p = GrayImage::from_fn(PATCH_SIZE, PATCH_SIZE, |x, _| if x < 61 { 10.0 } else { 200.0 });
        // analytic gradient: gx = 190 at columns 60 and 61, gy = 0 everywhere
        let (gx, gy) = gradients(&p);
        assert!(gy.iter().all(|v| *v == 0.0));
        assert_eq!(gx[60], 190.0);
        assert_eq!(gx[61], 190.0);
        assert_eq!(gx.iter().filter(|v| **v != 0.0).count(), 2 * PATCH_SIZE);
        let cells = cell_histograms(&p).unwrap();
        let total: f64 = cells.iter().sum();
        let bin0: f64 = cells.chunks_exact(BINS).map(|c| c[0]).sum();
        assert_eq!(total, 190.0 * 2.0 * PATCH_SIZE as f64);
        assert_eq!(bin0, total);
        let h = hog_features(&p).unwrap();
        let mut per_bin = [0.0; BINS];
        for (i, v) in h.iter().enumerate() {
            per_bin[i % BINS] += v * v;
        }
        assert!(per_bin[1..].iter().all(|v| *v == 0.0) && per_bin[0] > 0.0);
    }

    #[test]
    fn diagonal_votes_split_between_neighbors() {
        // 45° gradient lies between the 40° and 60° centers, a quarter of the way
        let p = GrayImage::from_fn(PATCH_SIZE, PATCH_SIZE, |x, y| (x + y) as f64);
        let cells = cell_histograms(&p).unwrap();
        let c = &cells[(5 * CELLS + 5) * BINS..(5 * CELLS + 6) * BINS];
        let mag = (8.0f64).sqrt() * 64.0;
        assert!((c[2] - 0.75 * mag).abs() < 1e-9);
        assert!((c[3] - 0.25 * mag).abs() < 1e-9);
    }
}
