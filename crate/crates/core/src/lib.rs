//! Continuous latent SVM: attribute-mediated prediction of a continuous
//! score from image features.
//!
//! The crate is organized bottom-up: [`numerics`] supplies the solvers,
//! [`svr`] trains the three linear predictors, [`clsvm`] couples them
//! through learned trade-off parameters, and [`baselines`] holds the
//! comparison methods and metrics. [`features`] turns face images into
//! feature vectors, [`ranker`] turns k-wise rankings into scores and
//! [`synth`] generates benchmark data with known ground truth.

// `!(x > 0.0)` is used on purpose: it also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod clsvm;
pub mod dataset;
pub mod error;
pub mod features;
pub mod io;
pub mod model;
pub mod numerics;
pub mod ranker;
pub mod schema;
pub mod svr;
pub mod synth;

pub use dataset::{compute_cooccurrence, load_dataset, save_dataset, Sample};
pub use error::{Error, Result};
pub use model::{ClsvmModel, CooccurrenceMatrix, LinearPredictors, TradeoffParams};
pub use schema::AttributeSchema;

/// Lowest admissible score.
pub const SCORE_MIN: f64 = 0.0;
/// Highest admissible score.
pub const SCORE_MAX: f64 = 10.0;
/// Lower bound on β₁ and β₂.
pub const BETA_FLOOR: f64 = 1e-6;
/// Confidences at or above this value count as an active attribute.
pub const BINARY_THRESHOLD: f64 = 0.5;
/// Label tolerance used throughout training unless overridden.
pub const DEFAULT_EPSILON: f64 = 0.5;

/// Maps attribute confidences to `{0, 1}` (`≥ 0.5 → 1`).
pub fn binarize(a: &[f64]) -> Vec<f64> {
    a.iter()
        .map(|v| if *v >= BINARY_THRESHOLD { 1.0 } else { 0.0 })
        .collect()
}

pub fn clip_score(y: f64) -> f64 {
    y.clamp(SCORE_MIN, SCORE_MAX)
}
