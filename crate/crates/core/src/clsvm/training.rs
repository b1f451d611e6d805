//! Learning the trade-off parameters `z` and the alternating outer loop.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::inference::{latent_from_terms, loss_augmented_from_terms, InferenceContext};
use super::potentials::{potentials_from_terms, FeatureTerms};
use crate::dataset::{compute_cooccurrence, validate_samples};
use crate::error::{Error, Result};
use crate::model::{ClsvmModel, LinearPredictors, TradeoffParams};
use crate::numerics::{axpy, norm_sq, projected_subgradient, QpOptions, StepRule};
use crate::schema::AttributeSchema;
use crate::svr::{train_attribute_regressors, train_svr, SvrConfig};
use crate::{Sample, DEFAULT_EPSILON};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    /// Weight of the `½‖z‖²` regularizer.
    pub gamma: f64,
    /// Half-width of the band of correct scores.
    pub epsilon: f64,
    /// Slope of the label loss `Δ(y, ȳ) = delta_scale·|y − ȳ|`.
    pub delta_scale: f64,
    pub outer_rounds: usize,
    pub subgrad_steps: usize,
    pub step_rule: StepRule,
    /// Keep the latent attributes fixed at their annotations.
    pub pin_attributes: bool,
    pub seed: u64,
    /// Feature → score and attributes → score regressions.
    pub svr: SvrConfig,
    /// Feature → attribute regressions.
    pub attribute_svr: SvrConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            gamma: 0.01,
            epsilon: DEFAULT_EPSILON,
            delta_scale: 1.0,
            outer_rounds: 3,
            subgrad_steps: 100,
            step_rule: StepRule::default(),
            pin_attributes: false,
            seed: 0,
            svr: SvrConfig::default(),
            attribute_svr: SvrConfig::attribute_default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "gamma must be positive, got {}",
                self.gamma
            )));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "epsilon must be positive, got {}",
                self.epsilon
            )));
        }
        if !(self.delta_scale >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "delta_scale must be nonnegative, got {}",
                self.delta_scale
            )));
        }
        self.svr.validate()?;
        self.attribute_svr.validate()
    }

    fn qp_options(&self, index: usize) -> QpOptions {
        QpOptions {
            seed: self.seed ^ (index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15),
            ..QpOptions::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RiskEvaluation {
    /// `R(z)`: mean hinged margin violation.
    pub risk: f64,
    /// `L(z) = γ/2·‖z‖² + R(z)`.
    pub loss: f64,
    /// A subgradient of `L` at `z`.
    pub subgradient: Vec<f64>,
    /// Samples with positive hinge.
    pub active: usize,
}

/// Per-sample data that stays fixed while `z` changes.
struct Prepared {
    terms: Vec<FeatureTerms>,
    scores: Vec<f64>,
}

fn prepare(samples: &[Sample], predictors: &LinearPredictors) -> Result<Prepared> {
    let terms = samples
        .iter()
        .map(|s| FeatureTerms::new(&s.x, predictors))
        .collect::<Result<Vec<_>>>()?;
    let scores = samples.iter().map(Sample::score).collect::<Result<Vec<_>>>()?;
    Ok(Prepared { terms, scores })
}

fn evaluate(prepared: &Prepared, model: &ClsvmModel, config: &TrainConfig) -> Result<RiskEvaluation> {
    let m = prepared.scores.len();
    let z = model.params.to_z();
    let ctx = InferenceContext::new(model)?;
    let per_sample: Vec<(f64, Option<Vec<f64>>)> = (0..m)
        .into_par_iter()
        .map(|i| {
            let terms = &prepared.terms[i];
            let y = prepared.scores[i];
            let opts = config.qp_options(i);
            let aug = loss_augmented_from_terms(&ctx, terms, y, config.delta_scale, &opts)?;
            let (a_true, truth) = latent_from_terms(&ctx, terms, y, &opts)?;
            let hinge = aug.value - truth;
            if hinge > 0.0 {
                let phi_aug = potentials_from_terms(terms, &aug.a, aug.y_bar, &model.predictors, &model.cooccurrence);
                let phi_true = potentials_from_terms(terms, &a_true, y, &model.predictors, &model.cooccurrence);
                let mut diff = phi_aug.flatten();
                axpy(-1.0, &phi_true.flatten(), &mut diff);
                Ok((hinge, Some(diff)))
            } else {
                Ok((0.0, None))
            }
        })
        .collect::<Result<_>>()?;

    let mut risk = 0.0;
    let mut grad = vec![0.0; z.len()];
    let mut active = 0;
    // sequential reduction keeps the result independent of thread scheduling
    for (hinge, diff) in &per_sample {
        risk += hinge;
        if let Some(d) = diff {
            axpy(1.0 / m as f64, d, &mut grad);
            active += 1;
        }
    }
    risk /= m as f64;
    axpy(config.gamma, &z, &mut grad);
    Ok(RiskEvaluation {
        risk,
        loss: 0.5 * config.gamma * norm_sq(&z) + risk,
        subgradient: grad,
        active,
    })
}

/// Structural risk, regularized loss and one subgradient at the model's `z`.
pub fn risk_and_subgradient(samples: &[Sample], model: &ClsvmModel, config: &TrainConfig) -> Result<RiskEvaluation> {
    config.validate()?;
    model.check_dims()?;
    if samples.is_empty() {
        return Err(Error::InvalidArgument("risk needs at least one sample".into()));
    }
    let prepared = prepare(samples, &model.predictors)?;
    evaluate(&prepared, model, config)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundSummary {
    pub round: usize,
    /// Best `L(z)` reached in this round.
    pub loss: f64,
    pub risk: f64,
    /// Best `L(z)` over all rounds so far.
    pub best_loss: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: ClsvmModel,
    pub rounds: Vec<RoundSummary>,
}

/// Fits the three linear predictors on `(x, a, y)` triples.
pub fn fit_predictors(
    samples: &[Sample],
    latent: &[Vec<f64>],
    svr: &SvrConfig,
    attribute_svr: &SvrConfig,
) -> Result<LinearPredictors> {
    let xs: Vec<&[f64]> = samples.iter().map(|s| s.x.as_slice()).collect();
    let ys: Vec<f64> = samples.iter().map(Sample::score).collect::<Result<_>>()?;
    let fs = train_svr(&xs, &ys, svr)?;
    let with_latent: Vec<Sample> = samples
        .iter()
        .zip(latent)
        .map(|(s, a)| Sample::new(s.id.clone(), s.x.clone(), Some(a.clone()), s.y))
        .collect();
    let (w_xa, b_xa) = train_attribute_regressors(&with_latent, attribute_svr)?;
    let ay = train_svr(latent, &ys, svr)?;
    Ok(LinearPredictors {
        w_xy: fs.w,
        b_xy: fs.b,
        w_xa,
        b_xa,
        w_ay: ay.w,
        b_ay: ay.b,
    })
}

/// Alternates predictor fits, `z` updates and latent attribute updates.
pub fn train(
    samples: &[Sample],
    schema: &AttributeSchema,
    predictors_init: Option<LinearPredictors>,
    config: &TrainConfig,
) -> Result<TrainOutcome> {
    config.validate()?;
    if samples.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "training needs at least 2 samples, got {}",
            samples.len()
        )));
    }
    validate_samples(samples, schema.len())?;
    let n = schema.len();
    let mut latent: Vec<Vec<f64>> = samples
        .iter()
        .map(|s| s.attributes().map(<[f64]>::to_vec))
        .collect::<Result<_>>()?;
    for s in samples {
        s.score()?;
    }
    let cooccurrence = compute_cooccurrence(samples)?;

    let predictors = match predictors_init {
        Some(p) => p,
        None => fit_predictors(samples, &latent, &config.svr, &config.attribute_svr)?,
    };
    let mut model = ClsvmModel::new(
        predictors,
        TradeoffParams::initial(n),
        cooccurrence,
        schema.clone(),
        config.epsilon,
    );
    model.check_dims()?;

    let mut best_model = model.clone();
    let mut best_loss = f64::INFINITY;
    let mut rounds = Vec::new();
    let mut previous_loss: Option<f64> = None;

    for round in 0..config.outer_rounds {
        if round > 0 {
            model.predictors = fit_predictors(samples, &latent, &config.svr, &config.attribute_svr)?;
        }
        let prepared = prepare(samples, &model.predictors)?;
        let outcome = {
            let mut scratch = model.clone();
            projected_subgradient(
                |z: &[f64]| {
                    scratch.params = TradeoffParams::from_z(z, n)?;
                    let eval = evaluate(&prepared, &scratch, config)?;
                    Ok((eval.loss, eval.subgradient))
                },
                &model.params.to_z(),
                |z: &mut [f64]| TradeoffParams::project_z(z, n),
                config.subgrad_steps,
                config.step_rule,
            )?
        };
        model.params = TradeoffParams::from_z(&outcome.best, n)?;
        let round_loss = outcome.best_value;
        if round_loss < best_loss {
            best_loss = round_loss;
            best_model = model.clone();
        }
        rounds.push(RoundSummary {
            round,
            loss: round_loss,
            risk: round_loss - 0.5 * config.gamma * norm_sq(&outcome.best),
            best_loss,
        });

        if !config.pin_attributes {
            let ctx = InferenceContext::new(&model)?;
            latent = (0..samples.len())
                .into_par_iter()
                .map(|i| {
                    let y = prepared.scores[i];
                    latent_from_terms(&ctx, &prepared.terms[i], y, &config.qp_options(i)).map(|(a, _)| a)
                })
                .collect::<Result<_>>()?;
        }

        if let Some(prev) = previous_loss {
            if prev - round_loss < 1e-4 * prev.abs() {
                break;
            }
        }
        previous_loss = Some(round_loss);
    }

    if config.outer_rounds == 0 {
        best_model = model;
    }
    Ok(TrainOutcome {
        model: best_model,
        rounds,
    })
}
