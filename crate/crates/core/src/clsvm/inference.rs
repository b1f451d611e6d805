//! Inference over attributes and score.
//!
//! The fitness is a quadratic in `(a, y)` jointly, so each maximization is a
//! box QP in `n + 1` variables. The joint solve is followed by
//! block-coordinate ascent (attributes given score, then closed-form score),
//! which keeps the result a fixed point of the two-block scheme.

use serde::{Deserialize, Serialize};

use super::potentials::{fitness_from_terms, FeatureTerms};
use crate::error::{Error, Result};
use crate::model::ClsvmModel;
use crate::numerics::{dot, solve_box_qp, solve_box_qp_with, BoxQp, Matrix, QpOptions, QpSpectrum};
use crate::{binarize, BINARY_THRESHOLD};

const BLOCK_ROUNDS: usize = 100;
const BLOCK_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    /// Final score, computed from the binarized attributes.
    pub y: f64,
    pub a_binary: Vec<f64>,
    /// Attribute confidences before binarization.
    pub a_confidence: Vec<f64>,
    /// Score paired with `a_confidence` before binarization.
    pub y_relaxed: f64,
    /// Fitness at `(a_confidence, y_relaxed)`.
    pub fitness_relaxed: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossAugmented {
    pub a: Vec<f64>,
    pub y_bar: f64,
    /// `zᵀφ(x, a, ȳ) + Δ(y, ȳ)`
    pub value: f64,
}

/// Label loss `Δ(y, ȳ) = scale·|y − ȳ|`.
pub fn label_loss(y: f64, y_bar: f64, scale: f64) -> f64 {
    scale * (y - y_bar).abs()
}

/// Hessian of the attribute block: `−2β₂·w_ay w_ayᵀ − 2·diag(λ) + (P⊙M) + (P⊙M)ᵀ`,
/// with the β₂ term dropped when no score is given.
fn attribute_hessian(model: &ClsvmModel, with_score: bool) -> Matrix {
    let n = model.n();
    let p = &model.params;
    let w = &model.predictors.w_ay;
    let mm = model.cooccurrence.matrix();
    let beta2 = if with_score { p.beta2 } else { 0.0 };
    Matrix::from_fn(n, n, |i, j| {
        let mut h = -2.0 * beta2 * w[i] * w[j] + p.p[(i, j)] * mm[(i, j)] + p.p[(j, i)] * mm[(j, i)];
        if i == j {
            h -= 2.0 * p.lambda[i];
        }
        h
    })
}

fn attribute_linear(model: &ClsvmModel, terms: &FeatureTerms, y: Option<f64>) -> Vec<f64> {
    let p = &model.params;
    let w = &model.predictors.w_ay;
    let shift = match y {
        Some(y) => -2.0 * p.beta2 * (model.predictors.b_ay - y),
        None => 0.0,
    };
    (0..model.n())
        .map(|i| shift * w[i] + 2.0 * p.lambda[i] * terms.attr_pred[i])
        .collect()
}

/// Hessian of the joint `(a, y)` problem.
fn joint_hessian(model: &ClsvmModel) -> Matrix {
    let n = model.n();
    let p = &model.params;
    let w = &model.predictors.w_ay;
    let haa = attribute_hessian(model, true);
    Matrix::from_fn(n + 1, n + 1, |i, j| match (i < n, j < n) {
        (true, true) => haa[(i, j)],
        (true, false) => 2.0 * p.beta2 * w[i],
        (false, true) => 2.0 * p.beta2 * w[j],
        (false, false) => -2.0 * (p.beta1 + p.beta2),
    })
}

/// Sample-independent pieces of inference for one model: the Hessians do
/// not depend on `x`, so their spectra are computed once.
pub(crate) struct InferenceContext<'m> {
    model: &'m ClsvmModel,
    joint: (Matrix, QpSpectrum),
    attr: (Matrix, QpSpectrum),
}

impl<'m> InferenceContext<'m> {
    pub fn new(model: &'m ClsvmModel) -> Result<Self> {
        let joint = joint_hessian(model);
        let attr = attribute_hessian(model, true);
        Ok(InferenceContext {
            model,
            joint: (joint.clone(), QpSpectrum::of(&joint)?),
            attr: (attr.clone(), QpSpectrum::of(&attr)?),
        })
    }
}

fn attributes_given_score(
    ctx: &InferenceContext,
    terms: &FeatureTerms,
    y: Option<f64>,
    opts: &QpOptions,
) -> Result<Vec<f64>> {
    let model = ctx.model;
    let linear = attribute_linear(model, terms, y);
    match y {
        Some(_) => {
            let qp = BoxQp::unit_box(ctx.attr.0.clone(), linear)?;
            Ok(solve_box_qp_with(&qp, &ctx.attr.1, opts)?.argmax)
        }
        None => {
            let qp = BoxQp::unit_box(attribute_hessian(model, false), linear)?;
            Ok(solve_box_qp(&qp, opts)?.argmax)
        }
    }
}

/// Score maximizing `−β₁(ŷ_x − y)² − β₂(ŷ_a − y)² + slope·y` over `[lo, hi]`.
fn score_step(model: &ClsvmModel, terms: &FeatureTerms, a: &[f64], slope: f64, lo: f64, hi: f64) -> f64 {
    let p = &model.params;
    let yhat_a = dot(&model.predictors.w_ay, a) + model.predictors.b_ay;
    let y = (p.beta1 * terms.yhat_x + p.beta2 * yhat_a + 0.5 * slope) / (p.beta1 + p.beta2);
    y.clamp(lo, hi)
}

/// Maximizes `fitness(a, y) + slope·y` over `a ∈ [0,1]ⁿ`, `y ∈ [lo, hi]`.
fn joint_maximize(
    ctx: &InferenceContext,
    terms: &FeatureTerms,
    slope: f64,
    lo: f64,
    hi: f64,
    opts: &QpOptions,
) -> Result<(Vec<f64>, f64)> {
    let model = ctx.model;
    let n = model.n();
    let p = &model.params;
    let w = &model.predictors.w_ay;
    let c = model.predictors.b_ay;
    let mut g: Vec<f64> = (0..n)
        .map(|i| -2.0 * p.beta2 * c * w[i] + 2.0 * p.lambda[i] * terms.attr_pred[i])
        .collect();
    g.push(2.0 * p.beta1 * terms.yhat_x + 2.0 * p.beta2 * c + slope);
    let mut lower = vec![0.0; n + 1];
    let mut upper = vec![1.0; n + 1];
    lower[n] = lo;
    upper[n] = hi;
    let qp = BoxQp::new(ctx.joint.0.clone(), g, lower, upper)?;
    let sol = solve_box_qp_with(&qp, &ctx.joint.1, opts)?;
    let exact = !sol.approximate;
    let mut a = sol.argmax;
    let mut y = a.pop().expect("score coordinate");
    // keep exact bounds despite round-off in the solver
    a.iter_mut().for_each(|v| *v = v.clamp(0.0, 1.0));
    y = y.clamp(lo, hi);

    if exact {
        // concave: the polished joint solution is already the global maximizer
        return Ok((a, y));
    }
    // block-coordinate ascent from the joint solution
    let objective = |a: &[f64], y: f64| fitness_from_terms(terms, a, y, model) + slope * y;
    let mut current = objective(&a, y);
    for _ in 0..BLOCK_ROUNDS {
        let a_next = attributes_given_score(ctx, terms, Some(y), opts)?;
        let y_next = score_step(model, terms, &a_next, slope, lo, hi);
        let next = objective(&a_next, y_next);
        if !(next >= current) {
            break;
        }
        let gain = next - current;
        a = a_next;
        y = y_next;
        current = next;
        if gain < BLOCK_TOL {
            break;
        }
    }
    Ok((a, y))
}

fn ready(model: &ClsvmModel) -> Result<()> {
    model.check_dims()?;
    if !(model.params.beta1 + model.params.beta2 > 0.0) {
        return Err(Error::Model("β₁ + β₂ must be positive for score inference".into()));
    }
    Ok(())
}

/// Attribute confidences maximizing the fitness for fixed `x` (and `y` when given).
pub fn infer_attributes(x: &[f64], y: Option<f64>, model: &ClsvmModel, opts: &QpOptions) -> Result<Vec<f64>> {
    model.check_dims()?;
    let terms = FeatureTerms::new(x, &model.predictors)?;
    attributes_given_score(&InferenceContext::new(model)?, &terms, y, opts)
}

/// `y* = (β₁ŷ_x + β₂ŷ_a) / (β₁ + β₂)`, clipped to the score range.
pub fn infer_score_given_attributes(x: &[f64], a: &[f64], model: &ClsvmModel) -> Result<f64> {
    ready(model)?;
    if a.len() != model.n() {
        return Err(Error::Dimension(format!(
            "attribute vector has length {}, expected {}",
            a.len(),
            model.n()
        )));
    }
    let terms = FeatureTerms::new(x, &model.predictors)?;
    let (lo, hi) = model.score_range;
    Ok(score_step(model, &terms, a, 0.0, lo, hi))
}

/// Relaxed joint maximization, then binarization at 0.5 and a final score step.
pub fn predict(x: &[f64], model: &ClsvmModel, opts: &QpOptions) -> Result<Prediction> {
    ready(model)?;
    let terms = FeatureTerms::new(x, &model.predictors)?;
    let (lo, hi) = model.score_range;
    let (a_conf, y_relaxed) = joint_maximize(&InferenceContext::new(model)?, &terms, 0.0, lo, hi, opts)?;
    let fitness_relaxed = fitness_from_terms(&terms, &a_conf, y_relaxed, model);
    let a_binary = binarize(&a_conf);
    debug_assert!(a_conf
        .iter()
        .zip(&a_binary)
        .all(|(c, b)| (*c >= BINARY_THRESHOLD) == (*b == 1.0)));
    let y = score_step(model, &terms, &a_binary, 0.0, lo, hi);
    Ok(Prediction {
        y,
        a_binary,
        a_confidence: a_conf,
        y_relaxed,
        fitness_relaxed,
    })
}

/// Best attribute vector for a known score: `argmax_a zᵀφ(x, a, y)`.
pub fn infer_latent(x: &[f64], y: f64, model: &ClsvmModel, opts: &QpOptions) -> Result<(Vec<f64>, f64)> {
    model.check_dims()?;
    let terms = FeatureTerms::new(x, &model.predictors)?;
    latent_from_terms(&InferenceContext::new(model)?, &terms, y, opts)
}

pub(crate) fn latent_from_terms(
    ctx: &InferenceContext,
    terms: &FeatureTerms,
    y: f64,
    opts: &QpOptions,
) -> Result<(Vec<f64>, f64)> {
    let mut a = attributes_given_score(ctx, terms, Some(y), opts)?;
    a.iter_mut().for_each(|v| *v = v.clamp(0.0, 1.0));
    let value = fitness_from_terms(terms, &a, y, ctx.model);
    Ok((a, value))
}

/// Score bounds of the incorrect-label set `{ȳ : |ȳ − y| ≥ ε}` within the
/// score range. Each returned bound satisfies the margin exactly in floating point.
pub fn incorrect_branches(y: f64, epsilon: f64, range: (f64, f64)) -> Result<Vec<(f64, f64)>> {
    let (lo, hi) = range;
    let mut branches = Vec::with_capacity(2);
    let mut below = y - epsilon;
    while y - below < epsilon {
        below = below.next_down();
    }
    if below >= lo {
        branches.push((lo, below));
    }
    let mut above = y + epsilon;
    while above - y < epsilon {
        above = above.next_up();
    }
    if above <= hi {
        branches.push((above, hi));
    }
    if branches.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "no score in [{lo}, {hi}] is at least {epsilon} away from {y}"
        )));
    }
    Ok(branches)
}

/// `max over a ∈ [0,1]ⁿ, ȳ ∈ 𝒴 of zᵀφ(x, a, ȳ) + delta_scale·|y − ȳ|`.
pub fn loss_augmented_infer(
    x: &[f64],
    y: f64,
    model: &ClsvmModel,
    delta_scale: f64,
    opts: &QpOptions,
) -> Result<LossAugmented> {
    ready(model)?;
    let terms = FeatureTerms::new(x, &model.predictors)?;
    loss_augmented_from_terms(&InferenceContext::new(model)?, &terms, y, delta_scale, opts)
}

pub(crate) fn loss_augmented_from_terms(
    ctx: &InferenceContext,
    terms: &FeatureTerms,
    y: f64,
    delta_scale: f64,
    opts: &QpOptions,
) -> Result<LossAugmented> {
    let model = ctx.model;
    let mut best: Option<LossAugmented> = None;
    for (lo, hi) in incorrect_branches(y, model.epsilon, model.score_range)? {
        // Δ is linear on each branch: +scale·(y − ȳ) below, +scale·(ȳ − y) above
        let slope = if hi < y { -delta_scale } else { delta_scale };
        let (a, y_bar) = joint_maximize(ctx, terms, slope, lo, hi, opts)?;
        let value = fitness_from_terms(terms, &a, y_bar, model) + label_loss(y, y_bar, delta_scale);
        if best.as_ref().is_none_or(|b| value > b.value) {
            best = Some(LossAugmented { a, y_bar, value });
        }
    }
    Ok(best.expect("at least one branch"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{CooccurrenceMatrix, LinearPredictors, TradeoffParams};
    use crate::schema::AttributeSchema;
    use crate::BETA_FLOOR;

    fn one_dim_model() -> ClsvmModel {
        let predictors = LinearPredictors {
            w_xy: vec![1.0],
            b_xy: 0.0,
            w_xa: Matrix::from_rows(&[vec![0.1, -0.2]]).unwrap(),
            b_xa: vec![0.3, 0.6],
            w_ay: vec![2.0, 1.0],
            b_ay: 3.0,
        };
        ClsvmModel::new(
            predictors,
            TradeoffParams::initial(2),
            CooccurrenceMatrix::zeros(2),
            AttributeSchema::anonymous(2),
            0.5,
        )
    }

    #[test]
    fn dominant_lambda_clips_prediction() {
        let mut model = one_dim_model();
        model.params.lambda = vec![1e6, 1e6];
        model.params.beta2 = 0.0;
        model.params.p = Matrix::zeros(2, 2);
        model.predictors.b_xa = vec![1.4, -0.3];
        let a = infer_attributes(&[2.0], None, &model, &QpOptions::default()).unwrap();
        let r = model.predictors.attributes_from_features(&[2.0]).unwrap();
        for (ai, ri) in a.iter().zip(&r) {
            assert!((ai - ri.clamp(0.0, 1.0)).abs() < 1e-9);
        }
    }

    #[test]
    fn weighted_mean_score() {
        let mut model = one_dim_model();
        model.params.beta1 = 1.0;
        model.params.beta2 = 3.0;
        // ŷ_x = 2 at x = 2; pick a with ŷ_a = 6: 2·a₁ + a₂ + 3 = 6 → a = (1, 1)
        let y = infer_score_given_attributes(&[2.0], &[1.0, 1.0], &model).unwrap();
        assert!((y - 5.0).abs() < 1e-12);
        // agreement
        let y = infer_score_given_attributes(&[7.0], &[1.0, 2.0], &model).unwrap();
        assert!((y - 7.0).abs() < 1e-12);
        // single-predictor limit
        model.params.beta2 = BETA_FLOOR;
        let y = infer_score_given_attributes(&[2.0], &[1.0, 1.0], &model).unwrap();
        assert!((y - 2.0).abs() < 1e-4);
    }

    #[test]
    fn tie_binarizes_to_one() {
        assert_eq!(binarize(&[0.5, 0.4999999, 1.0, 0.0]), vec![1.0, 0.0, 1.0, 0.0]);
    }

    #[test]
    fn branches_respect_margin_exactly() {
        for &y in &[0.7, 5.0, 9.6, 0.1, 3.3, 0.5, 9.5] {
            for (lo, hi) in incorrect_branches(y, 0.5, (0.0, 10.0)).unwrap() {
                if hi < y {
                    assert!(y - hi >= 0.5);
                } else {
                    assert!(lo - y >= 0.5);
                }
            }
        }
        assert!(incorrect_branches(5.0, 6.0, (0.0, 10.0)).is_err());
    }

    #[test]
    fn predicted_score_in_range() {
        let model = one_dim_model();
        for x in [-100.0, -3.0, 0.0, 4.2, 55.0] {
            let p = predict(&[x], &model, &QpOptions::default()).unwrap();
            assert!((0.0..=10.0).contains(&p.y));
            assert!((0.0..=10.0).contains(&p.y_relaxed));
        }
    }

    #[test]
    fn augmented_avoids_correct_band() {
        let model = one_dim_model();
        let out = loss_augmented_infer(&[5.0], 5.0, &model, 1.0, &QpOptions::default()).unwrap();
        assert!((out.y_bar - 5.0).abs() >= 0.5);
        assert!(!(4.5 < out.y_bar && out.y_bar < 5.5));
    }
}
