//! Gabor filter bank: 5 wavelengths × 8 orientations, applied by FFT.

use std::f64::consts::{PI, SQRT_2};
use std::sync::{Arc, OnceLock};

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use super::image::GrayImage;
use super::PATCH_SIZE;
use crate::error::Result;

pub const WAVELENGTHS: [f64; 5] = [4.0, 4.0 * SQRT_2, 8.0, 8.0 * SQRT_2, 16.0];
pub const ORIENTATIONS: usize = 8;
pub const FILTERS: usize = WAVELENGTHS.len() * ORIENTATIONS;
/// Gaussian width as a multiple of the wavelength.
pub const SIGMA_PER_WAVELENGTH: f64 = 0.56;
pub const ASPECT_RATIO: f64 = 0.5;
/// Side of the pooled response map fed to PCA.
pub const POOLED_SIZE: usize = PATCH_SIZE / 2;

/// Large enough that linear convolution of a 128² patch with the widest
/// kernel (109²) does not wrap around.
const FFT_SIZE: usize = 256;

/// One complex Gabor kernel, zero-mean, sampled on `[-radius, radius]²`.
#[derive(Debug, Clone)]
pub struct GaborFilter {
    pub wavelength: f64,
    pub theta: f64,
    pub radius: usize,
    /// Row-major `(2·radius + 1)²` taps; tap `(u, v)` sits at offset `(u − radius, v − radius)`.
    pub taps: Vec<Complex<f64>>,
}

impl GaborFilter {
    pub fn new(wavelength: f64, theta: f64) -> Self {
        let sigma = SIGMA_PER_WAVELENGTH * wavelength;
        let radius = (3.0 * sigma / ASPECT_RATIO).ceil() as usize;
        let side = 2 * radius + 1;
        let (c, s) = (theta.cos(), theta.sin());
        let mut envelope = Vec::with_capacity(side * side);
        let mut carrier = Vec::with_capacity(side * side);
        for v in 0..side {
            for u in 0..side {
                let x = u as f64 - radius as f64;
                let y = v as f64 - radius as f64;
                let xr = x * c + y * s;
                let yr = -x * s + y * c;
                let g = (-(xr * xr + ASPECT_RATIO * ASPECT_RATIO * yr * yr) / (2.0 * sigma * sigma)).exp();
                envelope.push(g);
                carrier.push(Complex::from_polar(1.0, 2.0 * PI * xr / wavelength));
            }
        }
        let mass: f64 = envelope.iter().sum();
        // subtract the envelope-weighted carrier mean so flat regions give 0
        let dc: Complex<f64> = envelope.iter().zip(&carrier).map(|(g, k)| k * g).sum::<Complex<f64>>() / mass;
        let taps = envelope
            .iter()
            .zip(&carrier)
            .map(|(g, k)| (k - dc) * (g / mass))
            .collect();
        GaborFilter {
            wavelength,
            theta,
            radius,
            taps,
        }
    }

    /// Tap at offset `(dx, dy)` from the center.
    pub fn tap(&self, dx: i64, dy: i64) -> Complex<f64> {
        let r = self.radius as i64;
        if dx.abs() > r || dy.abs() > r {
            return Complex::new(0.0, 0.0);
        }
        let side = 2 * self.radius + 1;
        self.taps[(dy + r) as usize * side + (dx + r) as usize]
    }
}

/// The 40-filter bank with precomputed kernel spectra.
pub struct GaborBank {
    filters: Vec<GaborFilter>,
    spectra: Vec<Vec<Complex<f64>>>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for GaborBank {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("GaborBank")
            .field("filters", &self.filters.len())
            .finish()
    }
}

fn transpose(buf: &mut [Complex<f64>], n: usize) {
    for i in 0..n {
        for j in (i + 1)..n {
            buf.swap(i * n + j, j * n + i);
        }
    }
}

impl GaborBank {
    pub fn new() -> Self {
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(FFT_SIZE);
        let inverse = planner.plan_fft_inverse(FFT_SIZE);
        let mut bank = GaborBank {
            filters: Vec::with_capacity(FILTERS),
            spectra: Vec::with_capacity(FILTERS),
            forward,
            inverse,
        };
        for &wavelength in &WAVELENGTHS {
            for o in 0..ORIENTATIONS {
                let filter = GaborFilter::new(wavelength, o as f64 * PI / ORIENTATIONS as f64);
                let mut buf = vec![Complex::new(0.0, 0.0); FFT_SIZE * FFT_SIZE];
                let r = filter.radius as i64;
                let n = FFT_SIZE as i64;
                for dy in -r..=r {
                    for dx in -r..=r {
                        let idx = dy.rem_euclid(n) as usize * FFT_SIZE + dx.rem_euclid(n) as usize;
                        buf[idx] = filter.tap(dx, dy);
                    }
                }
                bank.fft2(&mut buf, false);
                bank.spectra.push(buf);
                bank.filters.push(filter);
            }
        }
        bank
    }

    /// Shared instance; building the bank costs 40 FFTs.
    pub fn standard() -> &'static GaborBank {
        static BANK: OnceLock<GaborBank> = OnceLock::new();
        BANK.get_or_init(GaborBank::new)
    }

    pub fn filters(&self) -> &[GaborFilter] {
        &self.filters
    }

    /// Scale-major, orientation-minor index.
    pub fn index(scale: usize, orientation: usize) -> usize {
        scale * ORIENTATIONS + orientation
    }

    fn fft2(&self, buf: &mut [Complex<f64>], inverse: bool) {
        let plan = if inverse { &self.inverse } else { &self.forward };
        plan.process(buf);
        transpose(buf, FFT_SIZE);
        plan.process(buf);
        transpose(buf, FFT_SIZE);
    }

    /// Complex responses `R(p) = Σ_q k(q)·f(p − q)` with zeros outside the
    /// patch, one `128²` row-major map per filter.
    pub fn complex_responses(&self, patch: &GrayImage) -> Result<Vec<Vec<Complex<f64>>>> {
        patch.check_size(PATCH_SIZE, "Gabor filtering")?;
        let mut image = vec![Complex::new(0.0, 0.0); FFT_SIZE * FFT_SIZE];
        for y in 0..PATCH_SIZE {
            for x in 0..PATCH_SIZE {
                image[y * FFT_SIZE + x] = Complex::new(patch.get(x, y), 0.0);
            }
        }
        self.fft2(&mut image, false);
        let scale = 1.0 / (FFT_SIZE * FFT_SIZE) as f64;
        let mut out = Vec::with_capacity(FILTERS);
        let mut buf = vec![Complex::new(0.0, 0.0); FFT_SIZE * FFT_SIZE];
        for spectrum in &self.spectra {
            for ((b, a), k) in buf.iter_mut().zip(&image).zip(spectrum) {
                *b = a * k;
            }
            self.fft2(&mut buf, true);
            let mut map = Vec::with_capacity(PATCH_SIZE * PATCH_SIZE);
            for y in 0..PATCH_SIZE {
                map.extend(buf[y * FFT_SIZE..y * FFT_SIZE + PATCH_SIZE].iter().map(|v| v * scale));
            }
            out.push(map);
        }
        Ok(out)
    }

    /// Response magnitudes, flattened scale, orientation, row, column.
    pub fn features(&self, patch: &GrayImage) -> Result<Vec<f64>> {
        Ok(self
            .complex_responses(patch)?
            .iter()
            .flat_map(|map| map.iter().map(|v| v.norm()))
            .collect())
    }

    /// Magnitudes 2×2 mean-pooled to `64²` per filter.
    pub fn pooled_features(&self, patch: &GrayImage) -> Result<Vec<f64>> {
        let mags = self.features(patch)?;
        Ok(pool2(&mags))
    }
}

impl Default for GaborBank {
    fn default() -> Self {
        GaborBank::new()
    }
}

/// 2×2 mean pooling of consecutive `128²` maps.
fn pool2(maps: &[f64]) -> Vec<f64> {
    let n = PATCH_SIZE;
    let mut out = Vec::with_capacity(maps.len() / 4);
    for map in maps.chunks_exact(n * n) {
        for y in (0..n).step_by(2) {
            for x in (0..n).step_by(2) {
                let s = map[y * n + x] + map[y * n + x + 1] + map[(y + 1) * n + x] + map[(y + 1) * n + x + 1];
                out.push(0.25 * s);
            }
        }
    }
    out
}

/// Full-resolution magnitudes with the shared bank.
pub fn gabor_features(patch: &GrayImage) -> Result<Vec<f64>> {
    GaborBank::standard().features(patch)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn noise_patch(seed: u64) -> GrayImage {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        GrayImage::from_fn(PATCH_SIZE, PATCH_SIZE, |_, _| rng.random_range(0.0..255.0))
    }

    #[test]
    fn kernels_are_zero_mean() {
        for f in GaborBank::standard().filters() {
            let s: Complex<f64> = f.taps.iter().sum();
            assert!(s.norm() < 1e-12, "{} {}", f.wavelength, f.theta);
        }
        assert_eq!(GaborBank::standard().filters()[FILTERS - 1].radius, 54);
    }

    #[test]
    fn fft_matches_direct_convolution() {
        let bank = GaborBank::standard();
        let patch = noise_patch(1);
        let responses = bank.complex_responses(&patch).unwrap();
        for &fi in &[0usize, 13, 39] {
            let f = &bank.filters()[fi];
            let r = f.radius as i64;
            for &(px, py) in &[(0i64, 0i64), (64, 64), (127, 3), (50, 120)] {
                let mut direct = Complex::new(0.0, 0.0);
                for dy in -r..=r {
                    for dx in -r..=r {
                        direct += f.tap(dx, dy) * patch.get_or_zero(px - dx, py - dy);
                    }
                }
                let fast = responses[fi][py as usize * PATCH_SIZE + px as usize];
                assert!((fast - direct).norm() < 1e-9, "filter {fi} at {px},{py}");
            }
        }
    }

    #[test]
    fn zero_patch_zero_response() {
        let z = GrayImage::zeros(PATCH_SIZE, PATCH_SIZE);
        assert!(gabor_features(&z).unwrap().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn responses_are_linear() {
        let bank = GaborBank::standard();
        let a = noise_patch(2);
        let b = noise_patch(3);
        let sum = GrayImage::from_fn(PATCH_SIZE, PATCH_SIZE, |x, y| a.get(x, y) + b.get(x, y));
        let (ra, rb, rs) = (
            bank.complex_responses(&a).unwrap(),
            bank.complex_responses(&b).unwrap(),
            bank.complex_responses(&sum).unwrap(),
        );
        for f in [0, 21, 39] {
            for p in [0, 1000, 16383] {
                assert!((ra[f][p] + rb[f][p] - rs[f][p]).norm() < 1e-9);
            }
        }
    }

    #[test]
    fn pooled_length() {
        let out = GaborBank::standard().pooled_features(&noise_patch(4)).unwrap();
        assert_eq!(out.len(), FILTERS * POOLED_SIZE * POOLED_SIZE);
        assert!(gabor_features(&GrayImage::zeros(64, 64)).is_err());
    }
}
