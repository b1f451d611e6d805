use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ClsvmModel, CooccurrenceMatrix, LinearPredictors};
use crate::numerics::dot;

/// Per-term negated residuals whose inner product with `z` is the fitness.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PotentialVector {
    pub phi_xy: f64,
    pub phi_ay: f64,
    pub phi_xa: Vec<f64>,
    /// `vec((a aᵀ) ⊙ M)`, columns stacked.
    pub phi_aa: Vec<f64>,
}

impl PotentialVector {
    /// `[φ_xy; φ_ay; φ_xa; φ_aa]`, aligned with `TradeoffParams::to_z`.
    pub fn flatten(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(2 + self.phi_xa.len() + self.phi_aa.len());
        v.push(self.phi_xy);
        v.push(self.phi_ay);
        v.extend_from_slice(&self.phi_xa);
        v.extend_from_slice(&self.phi_aa);
        v
    }
}

/// Quantities that depend on `x` only through the fixed predictors.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct FeatureTerms {
    /// `w_xyᵀx + b_xy`
    pub yhat_x: f64,
    /// `W_xaᵀx + b_xa`
    pub attr_pred: Vec<f64>,
}

impl FeatureTerms {
    pub fn new(x: &[f64], predictors: &LinearPredictors) -> Result<Self> {
        Ok(FeatureTerms {
            yhat_x: predictors.score_from_features(x)?,
            attr_pred: predictors.attributes_from_features(x)?,
        })
    }
}

pub(crate) fn potentials_from_terms(
    terms: &FeatureTerms,
    a: &[f64],
    y: f64,
    predictors: &LinearPredictors,
    m: &CooccurrenceMatrix,
) -> PotentialVector {
    let n = a.len();
    let yhat_a = dot(&predictors.w_ay, a) + predictors.b_ay;
    let phi_xa = terms
        .attr_pred
        .iter()
        .zip(a)
        .map(|(r, ai)| -(r - ai) * (r - ai))
        .collect();
    let mm = m.matrix();
    let mut phi_aa = Vec::with_capacity(n * n);
    for j in 0..n {
        for i in 0..n {
            phi_aa.push(a[i] * a[j] * mm[(i, j)]);
        }
    }
    PotentialVector {
        phi_xy: -(terms.yhat_x - y) * (terms.yhat_x - y),
        phi_ay: -(yhat_a - y) * (yhat_a - y),
        phi_xa,
        phi_aa,
    }
}

pub fn potentials(
    x: &[f64],
    a: &[f64],
    y: f64,
    predictors: &LinearPredictors,
    m: &CooccurrenceMatrix,
) -> Result<PotentialVector> {
    let n = predictors.attribute_dim();
    if a.len() != n || m.n() != n {
        return Err(Error::Dimension(format!(
            "potentials: attribute vector has length {}, co-occurrence is {}x{1}, predictors expect {n}",
            a.len(),
            m.n()
        )));
    }
    let terms = FeatureTerms::new(x, predictors)?;
    Ok(potentials_from_terms(&terms, a, y, predictors, m))
}

/// The fitness being maximized at inference:
/// `−β₁(ŷ_x − y)² − β₂(ŷ_a − y)² − Σᵢ λᵢ(rᵢ − aᵢ)² + aᵀ(P⊙M)a`.
pub fn fitness(x: &[f64], a: &[f64], y: f64, model: &ClsvmModel) -> Result<f64> {
    model.check_dims()?;
    check_attribute_box(a, model.n())?;
    let terms = FeatureTerms::new(x, &model.predictors)?;
    Ok(fitness_from_terms(&terms, a, y, model))
}

pub(crate) fn check_attribute_box(a: &[f64], n: usize) -> Result<()> {
    if a.len() != n {
        return Err(Error::Dimension(format!(
            "attribute vector has length {}, expected {n}",
            a.len()
        )));
    }
    if let Some((i, v)) = a.iter().enumerate().find(|(_, v)| !(0.0..=1.0).contains(*v)) {
        return Err(Error::Validation(format!("attribute {i} = {v} is outside [0, 1]")));
    }
    Ok(())
}

pub(crate) fn fitness_from_terms(terms: &FeatureTerms, a: &[f64], y: f64, model: &ClsvmModel) -> f64 {
    let p = &model.params;
    let pred = &model.predictors;
    let yhat_a = dot(&pred.w_ay, a) + pred.b_ay;
    let mut value = -p.beta1 * (terms.yhat_x - y).powi(2) - p.beta2 * (yhat_a - y).powi(2);
    for ((r, ai), l) in terms.attr_pred.iter().zip(a).zip(&p.lambda) {
        value -= l * (r - ai) * (r - ai);
    }
    let mm = model.cooccurrence.matrix();
    let n = a.len();
    for i in 0..n {
        if a[i] == 0.0 {
            continue;
        }
        for j in 0..n {
            value += p.p[(i, j)] * mm[(i, j)] * a[i] * a[j];
        }
    }
    value
}
