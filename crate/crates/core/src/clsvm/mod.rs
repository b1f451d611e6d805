//! Continuous latent SVM: fitness, inference and structural training.

mod inference;
mod potentials;
mod training;

pub use inference::{
    incorrect_branches, infer_attributes, infer_latent, infer_score_given_attributes, label_loss, loss_augmented_infer,
    predict, LossAugmented, Prediction,
};
pub use potentials::{fitness, potentials, PotentialVector};
pub use training::{
    fit_predictors, risk_and_subgradient, train, RiskEvaluation, RoundSummary, TrainConfig, TrainOutcome,
};
