//! ε-insensitive linear support vector regression, trained in the primal.
//!
//! Minimizes `½‖w‖² + C·Σᵢ max(0, |wᵀxᵢ + b − yᵢ| − ε)`.
//!
//! Training runs full-batch projected subgradient descent as a warm start,
//! then a Newton-CG continuation on a Huber-smoothed loss whose smoothing
//! width shrinks towards zero, refits the bias exactly, and finally tries an
//! active-set polish: the samples sitting on the tube boundary are guessed
//! from the residuals and the stationarity conditions are solved as a
//! linear system. Each stage's point is kept only if it lowers the objective.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{all_finite, axpy, dot, norm, norm_sq, projected_subgradient, solve_linear, Matrix, StepRule};
use crate::Sample;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SvrConfig {
    /// Slack penalty.
    pub c: f64,
    /// Half-width of the insensitive tube.
    pub epsilon_tube: f64,
    /// Full-batch subgradient iterations.
    pub max_epochs: usize,
    pub tol: f64,
}

impl Default for SvrConfig {
    fn default() -> Self {
        SvrConfig {
            c: 1.0,
            epsilon_tube: 0.1,
            max_epochs: 200,
            tol: 1e-4,
        }
    }
}

impl SvrConfig {
    /// Defaults for regressing binary attribute annotations: a tube just
    /// under half the 0/1 gap makes the fit behave like a margin classifier
    /// around the 0.5 decision threshold.
    pub fn attribute_default() -> Self {
        SvrConfig {
            epsilon_tube: 0.45,
            ..SvrConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "SVR C must be positive, got {}",
                self.c
            )));
        }
        if !(self.epsilon_tube >= 0.0 && self.epsilon_tube.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "SVR tube width must be nonnegative, got {}",
                self.epsilon_tube
            )));
        }
        if !(self.tol > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "SVR tol must be positive, got {}",
                self.tol
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearRegressor {
    pub w: Vec<f64>,
    pub b: f64,
}

impl LinearRegressor {
    pub fn predict(&self, x: &[f64]) -> f64 {
        dot(&self.w, x) + self.b
    }
}

/// Primal objective `½‖w‖² + C·Σ max(0, |r| − ε)`.
pub fn primal_objective<X: AsRef<[f64]>>(w: &[f64], b: f64, inputs: &[X], targets: &[f64], config: &SvrConfig) -> f64 {
    let loss: f64 = inputs
        .iter()
        .zip(targets)
        .map(|(x, y)| ((dot(w, x.as_ref()) + b - y).abs() - config.epsilon_tube).max(0.0))
        .sum();
    0.5 * norm_sq(w) + config.c * loss
}

pub fn train_svr<X: AsRef<[f64]>>(inputs: &[X], targets: &[f64], config: &SvrConfig) -> Result<LinearRegressor> {
    config.validate()?;
    let m = inputs.len();
    if m < 2 {
        return Err(Error::InvalidArgument(format!("SVR needs at least 2 samples, got {m}")));
    }
    if targets.len() != m {
        return Err(Error::Dimension(format!("{m} inputs but {} targets", targets.len())));
    }
    let d = inputs[0].as_ref().len();
    for (i, x) in inputs.iter().enumerate() {
        let x = x.as_ref();
        if x.len() != d {
            return Err(Error::Dimension(format!(
                "SVR input {i} has dimension {}, expected {d}",
                x.len()
            )));
        }
        if !all_finite(x) {
            return Err(Error::Validation(format!("SVR input {i} is not finite")));
        }
    }
    if !all_finite(targets) {
        return Err(Error::Validation("SVR targets are not finite".into()));
    }

    let eps = config.epsilon_tube;
    let c = config.c;
    let mf = m as f64;

    // normalized objective f / (C·m): same minimizer, O(‖x‖) subgradients
    let objective = |v: &[f64]| -> Result<(f64, Vec<f64>)> {
        let (w, b) = v.split_at(d);
        let mut grad = vec![0.0; d + 1];
        let mut loss = 0.0;
        for (x, y) in inputs.iter().zip(targets) {
            let x = x.as_ref();
            let r = dot(w, x) + b[0] - y;
            if r.abs() > eps {
                loss += r.abs() - eps;
                let s = r.signum();
                axpy(s / mf, x, &mut grad[..d]);
                grad[d] += s / mf;
            }
        }
        for (g, wi) in grad[..d].iter_mut().zip(w) {
            *g += wi / (c * mf);
        }
        Ok((norm_sq(w) / (2.0 * c * mf) + loss / mf, grad))
    };

    let mean_sq = inputs.iter().map(|x| norm_sq(x.as_ref()) + 1.0).sum::<f64>() / mf;
    let rule = StepRule::Decaying {
        eta0: 1.0 / mean_sq,
        tau: (config.max_epochs as f64 / 10.0).max(10.0),
    };
    let mut init = vec![0.0; d + 1];
    init[d] = median(targets);
    let outcome = projected_subgradient(objective, &init, |_| {}, config.max_epochs, rule)?;

    let mut w = outcome.best[..d].to_vec();
    let mut b = best_bias(&w, inputs, targets, eps);
    let mut best = primal_objective(&w, b, inputs, targets, config);

    let (sw, _) = smoothed_newton(inputs, targets, config, w.clone(), b);
    let sb = best_bias(&sw, inputs, targets, eps);
    let value = primal_objective(&sw, sb, inputs, targets, config);
    if value < best {
        best = value;
        w = sw;
        b = sb;
    }

    let scale = targets.iter().fold(1.0f64, |acc, y| acc.max(y.abs()));
    for k in 0..6 {
        let band = 1e-2 * 10f64.powi(-k) * scale;
        if let Some((pw, pb)) = polish(&w, b, inputs, targets, config, band) {
            let value = primal_objective(&pw, pb, inputs, targets, config);
            if value < best {
                best = value;
                w = pw;
                b = pb;
            }
        }
    }
    if !best.is_finite() {
        return Err(Error::Numerical("SVR objective is not finite".into()));
    }
    Ok(LinearRegressor { w, b })
}

/// Huber-smoothed ε-insensitive loss of width `mu`, with its derivative and
/// whether `r` lies in the quadratic zone.
fn smoothed_loss(r: f64, eps: f64, mu: f64) -> (f64, f64, bool) {
    let u = r.abs() - eps;
    if u <= 0.0 {
        (0.0, 0.0, false)
    } else if u < mu {
        (0.5 * u * u / mu, r.signum() * u / mu, true)
    } else {
        (u - 0.5 * mu, r.signum(), false)
    }
}

/// Newton-CG on the smoothed primal, shrinking the smoothing width tenfold
/// per stage. The smoothed optimum is within `C·m·mu/2` of the true one.
fn smoothed_newton<X: AsRef<[f64]>>(
    inputs: &[X],
    targets: &[f64],
    config: &SvrConfig,
    mut w: Vec<f64>,
    mut b: f64,
) -> (Vec<f64>, f64) {
    let (eps, c) = (config.epsilon_tube, config.c);
    let d = w.len();
    let m = inputs.len() as f64;
    let scale = targets.iter().fold(1.0f64, |acc, y| acc.max(y.abs()));
    let grad_scale = 1.0 + c * inputs.iter().map(|x| (norm_sq(x.as_ref()) + 1.0).sqrt()).sum::<f64>();

    let objective = |w: &[f64], b: f64, mu: f64| -> f64 {
        let loss: f64 = inputs
            .iter()
            .zip(targets)
            .map(|(x, y)| smoothed_loss(dot(w, x.as_ref()) + b - y, eps, mu).0)
            .sum();
        0.5 * norm_sq(w) + c * loss
    };

    let mut mu = scale;
    while mu >= 1e-9 * scale {
        for _ in 0..50 {
            let mut grad = w.clone();
            grad.push(0.0);
            let mut quad = Vec::new();
            for (i, (x, y)) in inputs.iter().zip(targets).enumerate() {
                let x = x.as_ref();
                let (_, slope, in_quad) = smoothed_loss(dot(&w, x) + b - y, eps, mu);
                if slope != 0.0 {
                    axpy(c * slope, x, &mut grad[..d]);
                    grad[d] += c * slope;
                }
                if in_quad {
                    quad.push(i);
                }
            }
            let gnorm = norm(&grad);
            if gnorm <= 1e-12 * grad_scale {
                break;
            }

            // preconditioned CG on H·p = −g; the ridge keeps the bias
            // direction well-posed when no sample is in the quadratic zone
            let curv = c / mu;
            let ridge = 1e-10 * (1.0 + curv * m);
            let hess = |v: &[f64]| -> Vec<f64> {
                let mut out = v[..d].to_vec();
                out.push(ridge * v[d]);
                for &i in &quad {
                    let x = inputs[i].as_ref();
                    let t = curv * (dot(&v[..d], x) + v[d]);
                    axpy(t, x, &mut out[..d]);
                    out[d] += t;
                }
                out
            };
            let mut precond = vec![1.0; d + 1];
            precond[d] = ridge;
            for &i in &quad {
                for (p, xi) in precond.iter_mut().zip(inputs[i].as_ref()) {
                    *p += curv * xi * xi;
                }
                precond[d] += curv;
            }
            let forcing = 0.5f64.min(gnorm.sqrt() / grad_scale.sqrt()) * gnorm;
            let mut step = vec![0.0; d + 1];
            let mut res: Vec<f64> = grad.iter().map(|g| -g).collect();
            let mut z: Vec<f64> = res.iter().zip(&precond).map(|(r, p)| r / p).collect();
            let mut dir = z.clone();
            let mut rz = dot(&res, &z);
            for _ in 0..(2 * (d + 1)).min(500) {
                let hd = hess(&dir);
                let curvature = dot(&dir, &hd);
                if !(curvature > 0.0) {
                    break;
                }
                let alpha = rz / curvature;
                axpy(alpha, &dir, &mut step);
                axpy(-alpha, &hd, &mut res);
                if norm(&res) <= forcing {
                    break;
                }
                z = res.iter().zip(&precond).map(|(r, p)| r / p).collect();
                let rz_next = dot(&res, &z);
                let beta = rz_next / rz;
                rz = rz_next;
                for (dv, zv) in dir.iter_mut().zip(&z) {
                    *dv = zv + beta * *dv;
                }
            }
            let descent = dot(&grad, &step);
            if !(descent < 0.0) {
                break;
            }

            // Armijo backtracking
            let f0 = objective(&w, b, mu);
            let mut t = 1.0;
            let mut accepted = None;
            for _ in 0..60 {
                let mut cand = w.clone();
                axpy(t, &step[..d], &mut cand);
                let cb = b + t * step[d];
                let f1 = objective(&cand, cb, mu);
                if f1 <= f0 + 1e-4 * t * descent {
                    accepted = Some((cand, cb, f1));
                    break;
                }
                t *= 0.5;
            }
            let Some((nw, nb, f1)) = accepted else {
                break;
            };
            w = nw;
            b = nb;
            if f0 - f1 <= 1e-15 * f0.abs().max(1.0) {
                break;
            }
        }
        mu *= 0.1;
    }
    (w, b)
}

/// Exact minimizer over `b` of `Σ max(0, |b − cᵢ| − ε)`, `cᵢ = yᵢ − wᵀxᵢ`.
fn best_bias<X: AsRef<[f64]>>(w: &[f64], inputs: &[X], targets: &[f64], eps: f64) -> f64 {
    let centers: Vec<f64> = inputs
        .iter()
        .zip(targets)
        .map(|(x, y)| y - dot(w, x.as_ref()))
        .collect();
    let cost = |b: f64| -> f64 { centers.iter().map(|c| ((b - c).abs() - eps).max(0.0)).sum() };
    let mut candidates: Vec<f64> = centers.iter().flat_map(|c| [c - eps, c + eps]).collect();
    candidates.sort_by(f64::total_cmp);
    // the cost is convex and piecewise linear: scan breakpoints, take the
    // middle of any flat optimal stretch
    let costs: Vec<f64> = candidates.iter().map(|b| cost(*b)).collect();
    let min = costs.iter().copied().fold(f64::INFINITY, f64::min);
    let tol = 1e-12 * min.abs().max(1.0);
    let first = costs.iter().position(|v| *v <= min + tol).unwrap_or(0);
    let last = costs.iter().rposition(|v| *v <= min + tol).unwrap_or(first);
    0.5 * (candidates[first] + candidates[last])
}

/// Solves the stationarity system for a guessed boundary set.
fn polish<X: AsRef<[f64]>>(
    w: &[f64],
    b: f64,
    inputs: &[X],
    targets: &[f64],
    config: &SvrConfig,
    band: f64,
) -> Option<(Vec<f64>, f64)> {
    let eps = config.epsilon_tube;
    let c = config.c;
    let d = w.len();
    let residuals: Vec<f64> = inputs
        .iter()
        .zip(targets)
        .map(|(x, y)| dot(w, x.as_ref()) + b - y)
        .collect();

    let mut boundary = Vec::new();
    let mut sides = Vec::new();
    let mut outer_sum = vec![0.0; d];
    let mut outer_count = 0.0;
    for (i, r) in residuals.iter().enumerate() {
        if (r.abs() - eps).abs() <= band {
            boundary.push(i);
            sides.push(if eps > 0.0 { r.signum() } else { 0.0 });
        } else if r.abs() > eps {
            axpy(r.signum(), inputs[i].as_ref(), &mut outer_sum);
            outer_count += r.signum();
        }
    }
    let nb = boundary.len();
    if nb == 0 || nb > 1500 {
        return None;
    }
    let mut sys = Matrix::zeros(nb + 1, nb + 1);
    let mut rhs = vec![0.0; nb + 1];
    for (p, &i) in boundary.iter().enumerate() {
        let xi = inputs[i].as_ref();
        for (q, &j) in boundary.iter().enumerate() {
            sys[(p, q)] = -c * dot(xi, inputs[j].as_ref());
        }
        sys[(p, nb)] = 1.0;
        rhs[p] = targets[i] + sides[p] * eps + c * dot(xi, &outer_sum);
        sys[(nb, p)] = 1.0;
    }
    rhs[nb] = -outer_count;
    let sol = solve_linear(&sys, &rhs)?;

    let mut new_w = outer_sum;
    for (p, &i) in boundary.iter().enumerate() {
        let s = if sides[p] > 0.0 {
            sol[p].clamp(0.0, 1.0)
        } else if sides[p] < 0.0 {
            sol[p].clamp(-1.0, 0.0)
        } else {
            sol[p].clamp(-1.0, 1.0)
        };
        axpy(s, inputs[i].as_ref(), &mut new_w);
    }
    new_w.iter_mut().for_each(|v| *v *= -c);
    if !all_finite(&new_w) {
        return None;
    }
    let new_b = best_bias(&new_w, inputs, targets, eps);
    Some((new_w, new_b))
}

fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

/// One independent SVR per attribute column; returns `(W_xa, b_xa)`.
pub fn train_attribute_regressors(samples: &[Sample], config: &SvrConfig) -> Result<(Matrix, Vec<f64>)> {
    let first = samples
        .first()
        .ok_or_else(|| Error::InvalidArgument("no samples to train attribute regressors".into()))?;
    let n = first.attributes()?.len();
    let d = first.x.len();
    let inputs: Vec<&[f64]> = samples.iter().map(|s| s.x.as_slice()).collect();
    let columns: Vec<Vec<f64>> = (0..n)
        .map(|j| {
            samples
                .iter()
                .map(|s| s.attributes().map(|a| a[j]))
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;
    for s in samples {
        if s.attributes()?.len() != n {
            return Err(Error::Dimension(format!(
                "record {:?} has {} attributes, expected {n}",
                s.id,
                s.attributes()?.len()
            )));
        }
    }
    let fits: Vec<LinearRegressor> = columns
        .par_iter()
        .map(|targets| train_svr(&inputs, targets, config))
        .collect::<Result<_>>()?;
    let mut w_xa = Matrix::zeros(d, n);
    let mut b_xa = Vec::with_capacity(n);
    for (j, fit) in fits.into_iter().enumerate() {
        w_xa.set_col(j, &fit.w);
        b_xa.push(fit.b);
    }
    Ok((w_xa, b_xa))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn linear_data(m: usize, d: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let truth: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();
        let xs: Vec<Vec<f64>> = (0..m)
            .map(|_| (0..d).map(|_| StandardNormal.sample(&mut rng)).collect())
            .collect();
        let ys = xs.iter().map(|x| dot(&truth, x) + 2.0).collect();
        (xs, ys)
    }

    #[test]
    fn realizable_fit_stays_in_tube() {
        let (xs, ys) = linear_data(100, 3, 4);
        let cfg = SvrConfig {
            c: 100.0,
            ..SvrConfig::default()
        };
        let fit = train_svr(&xs, &ys, &cfg).unwrap();
        let inside = xs
            .iter()
            .zip(&ys)
            .filter(|(x, y)| (fit.predict(x) - *y).abs() <= cfg.epsilon_tube + 1e-9)
            .count();
        assert!(inside as f64 >= 0.99 * xs.len() as f64, "{inside}");
    }

    #[test]
    fn constant_targets_give_flat_model() {
        let (xs, _) = linear_data(30, 4, 8);
        let ys = vec![3.5; 30];
        let fit = train_svr(&xs, &ys, &SvrConfig::default()).unwrap();
        assert!(fit.w.iter().all(|v| v.abs() < 1e-6), "{:?}", fit.w);
        assert!((fit.b - 3.5).abs() <= 0.1 + 1e-9);
    }

    #[test]
    fn rejects_degenerate_input() {
        let cfg = SvrConfig::default();
        assert!(train_svr(&[vec![1.0]], &[1.0], &cfg).is_err());
        assert!(train_svr(&[vec![1.0], vec![1.0, 2.0]], &[1.0, 2.0], &cfg).is_err());
        let bad = SvrConfig { c: 0.0, ..cfg };
        assert!(train_svr(&[vec![1.0], vec![2.0]], &[1.0, 2.0], &bad).is_err());
    }

    #[test]
    fn best_bias_is_exact() {
        let xs = vec![vec![0.0]; 5];
        let ys = [0.0, 1.0, 2.0, 3.0, 10.0];
        let b = best_bias(&[0.0], &xs, &ys, 0.5);
        let cost = |b: f64| ys.iter().map(|y| ((b - y).abs() - 0.5f64).max(0.0)).sum::<f64>();
        for k in 0..2001 {
            let probe = -1.0 + 12.0 * k as f64 / 2000.0;
            assert!(cost(b) <= cost(probe) + 1e-12);
        }
    }
}
