//! Synthetic attribute-mediated benchmark with known ground truth, and an
//! exhaustive grid oracle for inference.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::clsvm::fitness;
use crate::error::{Error, Result};
use crate::model::ClsvmModel;
use crate::numerics::{dot, norm, Matrix};
use crate::{Sample, SCORE_MAX, SCORE_MIN};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthSpec {
    pub d: usize,
    pub n: usize,
    pub m_train: usize,
    pub m_test: usize,
    pub noise_a: f64,
    pub noise_y: f64,
    pub seed: u64,
    /// Share of the score's variance routed through the attributes.
    pub attribute_mediation: f64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            d: 50,
            n: 19,
            m_train: 600,
            m_test: 200,
            noise_a: 0.1,
            noise_y: 0.3,
            seed: 0,
            attribute_mediation: 0.9,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if self.d == 0 || self.n == 0 {
            return Err(Error::InvalidArgument("synthetic dimensions must be at least 1".into()));
        }
        if !(self.noise_a >= 0.0 && self.noise_y >= 0.0) {
            return Err(Error::InvalidArgument("noise levels must be nonnegative".into()));
        }
        if !(0.0..=1.0).contains(&self.attribute_mediation) {
            return Err(Error::InvalidArgument(format!(
                "attribute_mediation must be in [0, 1], got {}",
                self.attribute_mediation
            )));
        }
        Ok(())
    }
}

/// Generating parameters of a synthetic dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    /// `d×n`
    pub w_xa: Matrix,
    pub b_xa: Vec<f64>,
    pub w_ay: Vec<f64>,
    /// Unit-norm direct feature→score direction.
    pub v_xy: Vec<f64>,
    /// Mean and standard deviation used to standardize `w_ayᵀa`.
    pub attr_mean: f64,
    pub attr_std: f64,
    pub center: f64,
    pub spread: f64,
}

impl GroundTruth {
    /// `P(aⱼ = 1)` for each slot.
    pub fn marginals(&self, noise_a: f64) -> Vec<f64> {
        let normal = Normal::standard();
        (0..self.b_xa.len())
            .map(|j| {
                let sd = (norm(&self.w_xa.col(j)).powi(2) + noise_a * noise_a).sqrt();
                normal.cdf((self.b_xa[j] - 0.5) / sd)
            })
            .collect()
    }

    /// Noise-free score for given features and attributes.
    pub fn score(&self, x: &[f64], a: &[f64], mediation: f64) -> f64 {
        let attr = (dot(&self.w_ay, a) - self.attr_mean) / self.attr_std;
        let direct = dot(&self.v_xy, x);
        self.center + self.spread * (mediation.sqrt() * attr + (1.0 - mediation).sqrt() * direct)
    }
}

#[derive(Debug, Clone)]
pub struct SynthDataset {
    pub train: Vec<Sample>,
    pub test: Vec<Sample>,
    pub truth: GroundTruth,
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

pub fn generate(spec: &SynthSpec) -> Result<SynthDataset> {
    spec.validate()?;
    let (d, n) = (spec.d, spec.n);
    let mut rng = stream_rng(spec.seed, 0);
    let inv_sqrt_d = 1.0 / (d as f64).sqrt();
    let w_xa = Matrix::from_fn(d, n, |_, _| gaussian(&mut rng) * inv_sqrt_d);
    let b_xa: Vec<f64> = (0..n).map(|_| rng.random_range(-0.2..1.2)).collect();
    let w_ay: Vec<f64> = (0..n).map(|_| gaussian(&mut rng)).collect();
    let mut v_xy: Vec<f64> = (0..d).map(|_| gaussian(&mut rng)).collect();
    let vn = norm(&v_xy);
    v_xy.iter_mut().for_each(|v| *v /= vn);

    let mut truth = GroundTruth {
        w_xa,
        b_xa,
        w_ay,
        v_xy,
        attr_mean: 0.0,
        attr_std: 1.0,
        center: 0.5 * (SCORE_MIN + SCORE_MAX),
        spread: 2.0,
    };
    let p = truth.marginals(spec.noise_a);
    truth.attr_mean = truth.w_ay.iter().zip(&p).map(|(w, pj)| w * pj).sum();
    let var: f64 = truth.w_ay.iter().zip(&p).map(|(w, pj)| w * w * pj * (1.0 - pj)).sum();
    truth.attr_std = var.sqrt().max(1e-12);

    // one counter-based stream per sample: index k draws the same values
    // regardless of how many samples are generated around it
    let draw = |k: usize, id: String| -> Sample {
        let mut rng = stream_rng(spec.seed, k as u64 + 1);
        let x: Vec<f64> = (0..d).map(|_| gaussian(&mut rng)).collect();
        let raw = truth.w_xa.tr_matvec(&x);
        let a: Vec<f64> = raw
            .iter()
            .zip(&truth.b_xa)
            .map(|(r, b)| (r + b + spec.noise_a * gaussian(&mut rng)).clamp(0.0, 1.0).round())
            .collect();
        let y = truth.score(&x, &a, spec.attribute_mediation) + spec.noise_y * gaussian(&mut rng);
        Sample::new(id, x, Some(a), Some(y.clamp(SCORE_MIN, SCORE_MAX)))
    };
    let train = (0..spec.m_train).map(|k| draw(k, format!("train-{k:05}"))).collect();
    let test = (0..spec.m_test)
        .map(|k| draw(spec.m_train + k, format!("test-{k:05}")))
        .collect();
    Ok(SynthDataset { train, test, truth })
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridOptimum {
    pub a: Vec<f64>,
    pub y: f64,
    pub value: f64,
}

fn grid_points(step: f64) -> Vec<f64> {
    let count = (1.0 / step + 1e-9).floor() as usize;
    let mut pts: Vec<f64> = (0..=count).map(|i| i as f64 * step).filter(|v| *v <= 1.0).collect();
    if *pts.last().unwrap_or(&0.0) < 1.0 {
        pts.push(1.0);
    }
    pts
}

/// Exhaustive maximization of the fitness over an attribute grid of
/// spacing `grid_step`; for each grid point the score is maximized exactly
/// (the fitness is a concave parabola in `y`).
pub fn grid_oracle_fitness(x: &[f64], model: &ClsvmModel, grid_step: f64) -> Result<GridOptimum> {
    let n = model.n();
    if n > 3 {
        return Err(Error::InvalidArgument(format!("grid oracle supports n ≤ 3, got {n}")));
    }
    if !(grid_step > 0.0 && grid_step <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "grid step must be in (0, 1], got {grid_step}"
        )));
    }
    let pts = grid_points(grid_step);
    let (lo, hi) = model.score_range;
    let p = &model.params;
    let yhat_x = model.predictors.score_from_features(x)?;
    let mut best = GridOptimum {
        a: vec![0.0; n],
        y: lo,
        value: f64::NEG_INFINITY,
    };
    let mut idx = vec![0usize; n];
    let mut a = vec![0.0; n];
    loop {
        for (ai, &k) in a.iter_mut().zip(&idx) {
            *ai = pts[k];
        }
        let yhat_a = model.predictors.score_from_attributes(&a)?;
        let denom = p.beta1 + p.beta2;
        let y = if denom > 0.0 {
            ((p.beta1 * yhat_x + p.beta2 * yhat_a) / denom).clamp(lo, hi)
        } else {
            lo
        };
        let value = fitness(x, &a, y, model)?;
        if value > best.value {
            best = GridOptimum { a: a.clone(), y, value };
        }
        // odometer increment over the attribute grid
        let mut k = 0;
        while k < n {
            idx[k] += 1;
            if idx[k] < pts.len() {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
        if k == n {
            break;
        }
    }
    Ok(best)
}
