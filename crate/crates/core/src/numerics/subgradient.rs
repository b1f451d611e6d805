use serde::{Deserialize, Serialize};

use super::matrix::{all_finite, norm};
use crate::error::{Error, Result};

/// Step-size schedule for [`projected_subgradient`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StepRule {
    /// `η_t = η₀ / (1 + t/τ)`
    Decaying { eta0: f64, tau: f64 },
    /// Same schedule applied to the unit subgradient direction `g/‖g‖`.
    NormalizedDecaying { eta0: f64, tau: f64 },
    /// Per-coordinate `η₀ / √(Σ_{s≤t} g_s,i²)` (diagonal AdaGrad). Followed by
    /// the Euclidean projection this is an exact projected step only for
    /// coordinate-separable feasible sets (boxes, orthants).
    Adagrad { eta0: f64 },
}

impl Default for StepRule {
    fn default() -> Self {
        StepRule::Decaying { eta0: 0.1, tau: 50.0 }
    }
}

impl StepRule {
    pub fn step(&self, t: usize, grad_norm: f64) -> f64 {
        match *self {
            StepRule::Decaying { eta0, tau } => eta0 / (1.0 + t as f64 / tau),
            StepRule::NormalizedDecaying { eta0, tau } => {
                if grad_norm > 0.0 {
                    eta0 / (1.0 + t as f64 / tau) / grad_norm
                } else {
                    0.0
                }
            }
            // per-coordinate; scaled in `projected_subgradient`
            StepRule::Adagrad { eta0 } => eta0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SubgradientOutcome {
    pub best: Vec<f64>,
    pub best_value: f64,
    /// Objective at every visited iterate, in visit order.
    pub history: Vec<f64>,
}

/// Minimizes a (possibly nonsmooth) objective by projected subgradient
/// steps and returns the best visited iterate.
///
/// `objective` returns the value and one subgradient at a feasible point.
/// `project` maps an arbitrary point onto the feasible set in place.
pub fn projected_subgradient<F, P>(
    mut objective: F,
    init: &[f64],
    project: P,
    steps: usize,
    rule: StepRule,
) -> Result<SubgradientOutcome>
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
    P: Fn(&mut [f64]),
{
    let mut x = init.to_vec();
    project(&mut x);
    let mut best = x.clone();
    let mut best_value = f64::INFINITY;
    let mut history = Vec::with_capacity(steps + 1);
    let mut sq_sum = vec![0.0; x.len()];

    for t in 0..=steps {
        let (value, grad) = objective(&x)?;
        if !value.is_finite() || !all_finite(&grad) {
            return Err(Error::Numerical(format!(
                "subgradient iteration {t}: objective {value} or its subgradient is not finite"
            )));
        }
        if grad.len() != x.len() {
            return Err(Error::Dimension(format!(
                "subgradient has length {}, iterate has {}",
                grad.len(),
                x.len()
            )));
        }
        history.push(value);
        if value < best_value {
            best_value = value;
            best.clone_from(&x);
        }
        if t == steps {
            break;
        }
        let eta = rule.step(t, norm(&grad));
        if let StepRule::Adagrad { .. } = rule {
            for ((xi, gi), acc) in x.iter_mut().zip(&grad).zip(sq_sum.iter_mut()) {
                *acc += gi * gi;
                if *acc > 0.0 {
                    *xi -= eta * gi / acc.sqrt();
                }
            }
        } else {
            for (xi, gi) in x.iter_mut().zip(&grad) {
                *xi -= eta * gi;
            }
        }
        project(&mut x);
    }

    Ok(SubgradientOutcome {
        best,
        best_value,
        history,
    })
}
