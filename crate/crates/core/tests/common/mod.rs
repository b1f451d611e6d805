//! Independent reference implementations shared by the integration tests
//! and the acceptance suite. Nothing here calls the solver under test.
#![allow(dead_code, clippy::needless_range_loop)]

use clsvm_core::features::gabor::{GaborBank, ORIENTATIONS, WAVELENGTHS};
use clsvm_core::features::{GrayImage, PATCH_SIZE};
use clsvm_core::model::{CooccurrenceMatrix, LinearPredictors, TradeoffParams};
use clsvm_core::numerics::{jacobi_eigen, Matrix};
use clsvm_core::ranker::KWiseAnnotation;
use clsvm_core::{AttributeSchema, ClsvmModel};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform_vec(rng: &mut ChaCha8Rng, len: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..len).map(|_| rng.random_range(lo..hi)).collect()
}

/// Random model with predictions roughly inside the score range. With
/// `concave` the joint `(a, y)` Hessian is redrawn until negative definite.
pub fn random_model(rng: &mut ChaCha8Rng, d: usize, n: usize, concave: bool) -> ClsvmModel {
    loop {
        let predictors = LinearPredictors {
            w_xy: uniform_vec(rng, d, -1.0, 1.0),
            b_xy: rng.random_range(3.0..7.0),
            w_xa: Matrix::from_fn(d, n, |_, _| rng.random_range(-0.5..0.5)),
            b_xa: uniform_vec(rng, n, 0.0, 1.0),
            w_ay: uniform_vec(rng, n, -3.0, 3.0),
            b_ay: rng.random_range(2.0..8.0),
        };
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let v = rng.random_range(0.0..1.0);
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        let params = TradeoffParams {
            beta1: rng.random_range(0.1..2.0),
            beta2: rng.random_range(0.1..2.0),
            lambda: uniform_vec(rng, n, 0.1, 2.0),
            p: Matrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0)),
        };
        let model = ClsvmModel::new(
            predictors,
            params,
            CooccurrenceMatrix::new(m).expect("valid co-occurrence"),
            AttributeSchema::anonymous(n),
            0.5,
        );
        if !concave || max_joint_eigenvalue(&model) < -1e-3 {
            return model;
        }
    }
}

/// Largest eigenvalue of the fitness Hessian in `(a, y)`.
pub fn max_joint_eigenvalue(model: &ClsvmModel) -> f64 {
    let n = model.n();
    let p = &model.params;
    let w = &model.predictors.w_ay;
    let m = model.cooccurrence.matrix();
    let h = Matrix::from_fn(n + 1, n + 1, |i, j| {
        if i == n && j == n {
            -2.0 * (p.beta1 + p.beta2)
        } else if i == n {
            2.0 * p.beta2 * w[j]
        } else if j == n {
            2.0 * p.beta2 * w[i]
        } else {
            let diag = if i == j { -2.0 * p.lambda[i] } else { 0.0 };
            -2.0 * p.beta2 * w[i] * w[j] + diag + p.p[(i, j)] * m[(i, j)] + p.p[(j, i)] * m[(j, i)]
        }
    });
    jacobi_eigen(&h)
        .expect("eigen")
        .values
        .iter()
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Term-by-term scalar fitness, written without any library helper.
pub fn reference_fitness(x: &[f64], a: &[f64], y: f64, model: &ClsvmModel) -> f64 {
    let pr = &model.predictors;
    let pa = &model.params;
    let n = a.len();
    let mut yx = pr.b_xy;
    for (w, v) in pr.w_xy.iter().zip(x) {
        yx += w * v;
    }
    let mut ya = pr.b_ay;
    for (w, v) in pr.w_ay.iter().zip(a) {
        ya += w * v;
    }
    let mut f = -pa.beta1 * (yx - y).powi(2) - pa.beta2 * (ya - y).powi(2);
    for j in 0..n {
        let mut r = pr.b_xa[j];
        for (k, v) in x.iter().enumerate() {
            r += pr.w_xa[(k, j)] * v;
        }
        f -= pa.lambda[j] * (r - a[j]).powi(2);
    }
    let m = model.cooccurrence.matrix();
    for i in 0..n {
        for j in 0..n {
            f += a[i] * pa.p[(i, j)] * m[(i, j)] * a[j];
        }
    }
    f
}

/// Smallest double `v ≤ y − eps` with `y − v ≥ eps`, and the mirror above.
pub fn margin_bounds(y: f64, eps: f64) -> (f64, f64) {
    let mut below = y - eps;
    while y - below < eps {
        below = below.next_down();
    }
    let mut above = y + eps;
    while above - y < eps {
        above = above.next_up();
    }
    (below, above)
}

/// Joint grid search of `fitness(a, ȳ) + δ|y − ȳ|` over `a ∈ [0,1]` and
/// `ȳ ∈ [0,10]` with `|ȳ − y| ≥ ε`, for one-attribute models.
pub fn grid_loss_augmented(x: &[f64], y: f64, model: &ClsvmModel, delta: f64, step: f64) -> (f64, f64, f64) {
    assert_eq!(model.n(), 1);
    let (below, above) = margin_bounds(y, model.epsilon);
    let mut ys = Vec::new();
    let count = (10.0 / step).round() as usize;
    for k in 0..=count {
        let v = k as f64 * step;
        if v <= below || v >= above {
            ys.push(v);
        }
    }
    for v in [below, above] {
        if (0.0..=10.0).contains(&v) {
            ys.push(v);
        }
    }
    let a_count = (1.0 / step).round() as usize;
    // expand the fitness as a quadratic in (a, ȳ) once, then scan
    let pr = &model.predictors;
    let pa = &model.params;
    let yx = pr.b_xy + pr.w_xy.iter().zip(x).map(|(w, v)| w * v).sum::<f64>();
    let r = pr.b_xa[0] + (0..x.len()).map(|k| pr.w_xa[(k, 0)] * x[k]).sum::<f64>();
    let quad = pa.p[(0, 0)] * model.cooccurrence.matrix()[(0, 0)];
    let mut best = (f64::NEG_INFINITY, 0.0, 0.0);
    for i in 0..=a_count {
        let a = i as f64 * step;
        let ya = pr.b_ay + pr.w_ay[0] * a;
        let attr = -pa.lambda[0] * (r - a).powi(2) + quad * a * a;
        for &yb in &ys {
            let v = -pa.beta1 * (yx - yb).powi(2) - pa.beta2 * (ya - yb).powi(2) + attr + delta * (y - yb).abs();
            if v > best.0 {
                best = (v, a, yb);
            }
        }
    }
    best
}

/// ε-insensitive SVR primal optimum found through its dual
/// `min ½βᵀKβ − yᵀβ + ε‖β‖₁, Σβ = 0, |βᵢ| ≤ C`
/// by exact pairwise coordinate descent, then an exact bias line search.
pub fn dual_svr_primal_optimum(xs: &[Vec<f64>], ys: &[f64], c: f64, eps: f64) -> f64 {
    let m = xs.len();
    let k = |i: usize, j: usize| -> f64 { xs[i].iter().zip(&xs[j]).map(|(a, b)| a * b).sum() };
    let kmat: Vec<Vec<f64>> = (0..m).map(|i| (0..m).map(|j| k(i, j)).collect()).collect();
    let mut beta = vec![0.0; m];
    let mut g: Vec<f64> = ys.iter().map(|y| -y).collect(); // Kβ − y
    for _sweep in 0..20_000 {
        let mut improvement: f64 = 0.0;
        for i in 0..m {
            for j in 0..m {
                if i == j {
                    continue;
                }
                let eta = kmat[i][i] + kmat[j][j] - 2.0 * kmat[i][j];
                let lo = (-c - beta[i]).max(beta[j] - c);
                let hi = (c - beta[i]).min(beta[j] + c);
                if hi - lo <= 0.0 {
                    continue;
                }
                let obj = |t: f64| -> f64 {
                    t * (g[i] - g[j])
                        + 0.5 * t * t * eta
                        + eps * ((beta[i] + t).abs() - beta[i].abs())
                        + eps * ((beta[j] - t).abs() - beta[j].abs())
                };
                let mut cands = vec![lo, hi, -beta[i], beta[j]];
                if eta > 1e-15 {
                    for si in [-1.0, 1.0] {
                        for sj in [-1.0, 1.0] {
                            cands.push(-(g[i] - g[j] + eps * si - eps * sj) / eta);
                        }
                    }
                }
                let mut best_t = 0.0;
                let mut best_v = 0.0;
                for t in cands {
                    if t < lo || t > hi {
                        continue;
                    }
                    let v = obj(t);
                    if v < best_v {
                        best_v = v;
                        best_t = t;
                    }
                }
                if best_t != 0.0 {
                    beta[i] += best_t;
                    beta[j] -= best_t;
                    for (r, gr) in g.iter_mut().enumerate() {
                        *gr += best_t * (kmat[r][i] - kmat[r][j]);
                    }
                    improvement = improvement.max(-best_v);
                }
            }
        }
        if improvement < 1e-15 {
            break;
        }
    }
    let d = xs[0].len();
    let mut w = vec![0.0; d];
    for (b, x) in beta.iter().zip(xs) {
        for (wk, xk) in w.iter_mut().zip(x) {
            *wk += b * xk;
        }
    }
    let resid: Vec<f64> = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| y - x.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>())
        .collect();
    let loss = |b: f64| -> f64 { resid.iter().map(|r| ((r - b).abs() - eps).max(0.0)).sum() };
    let best_loss = resid
        .iter()
        .flat_map(|r| [r - eps, r + eps])
        .map(loss)
        .fold(f64::INFINITY, f64::min);
    0.5 * w.iter().map(|v| v * v).sum::<f64>() + c * best_loss
}

/// Consistent k-wise annotations over `items` ranked best-first: a chain of
/// overlapping windows that links every adjacent pair, then random subsets
/// of the same size, each listed in true order.
pub fn chained_annotations(items: usize, k: usize, total: usize, seed: u64) -> (Vec<String>, Vec<KWiseAnnotation>) {
    let ids: Vec<String> = (0..items).map(|i| format!("item-{i:02}")).collect();
    let mut out = Vec::new();
    let mut start = 0;
    loop {
        let s = start.min(items - k);
        out.push((s..s + k).collect::<Vec<usize>>());
        if s + k >= items {
            break;
        }
        start += k - 1;
    }
    let mut rng = rng(seed);
    let mut pool: Vec<usize> = (0..items).collect();
    while out.len() < total {
        pool.shuffle(&mut rng);
        let mut pick = pool[..k].to_vec();
        pick.sort_unstable();
        out.push(pick);
    }
    let anns = out
        .into_iter()
        .enumerate()
        .map(|(i, idx)| KWiseAnnotation {
            annotator: format!("rater-{}", i % 7),
            items: idx.into_iter().map(|j| ids[j].clone()).collect(),
        })
        .collect();
    (ids, anns)
}

/// Sinusoid at a filter's preferred wavelength and orientation.
pub fn sinusoid_probe(wavelength: f64, theta: f64) -> GrayImage {
    let (c, s) = (theta.cos(), theta.sin());
    GrayImage::from_fn(PATCH_SIZE, PATCH_SIZE, |x, y| {
        let u = x as f64 * c + y as f64 * s;
        128.0 + 100.0 * (2.0 * std::f64::consts::PI * u / wavelength).cos()
    })
}

/// For every filter: its mean response magnitude to its own probe and the
/// largest mean among same-scale filters at other orientations. Responses
/// come from direct spatial convolution on a strided grid of pixels whose
/// kernel support lies inside the patch.
pub fn orientation_selectivity(stride: usize) -> Vec<(usize, f64, f64)> {
    let bank = GaborBank::standard();
    let filters = bank.filters();
    let mut out = Vec::new();
    for (s, &wavelength) in WAVELENGTHS.iter().enumerate() {
        for o in 0..ORIENTATIONS {
            let idx = GaborBank::index(s, o);
            let probe = sinusoid_probe(wavelength, filters[idx].theta);
            let r = filters[idx].radius as i64;
            let mean = |f: usize| -> f64 {
                let filt = &filters[f];
                let (mut sum, mut count) = (0.0, 0usize);
                let mut py = r;
                while py < PATCH_SIZE as i64 - r {
                    let mut px = r;
                    while px < PATCH_SIZE as i64 - r {
                        let mut acc = (0.0f64, 0.0f64);
                        for dy in -r..=r {
                            for dx in -r..=r {
                                let t = filt.tap(dx, dy);
                                let v = probe.get_or_zero(px - dx, py - dy);
                                acc.0 += t.re * v;
                                acc.1 += t.im * v;
                            }
                        }
                        sum += acc.0.hypot(acc.1);
                        count += 1;
                        px += stride as i64;
                    }
                    py += stride as i64;
                }
                sum / count as f64
            };
            let own = mean(idx);
            let other = (0..ORIENTATIONS)
                .filter(|&q| q != o)
                .map(|q| mean(GaborBank::index(s, q)))
                .fold(f64::NEG_INFINITY, f64::max);
            out.push((idx, own, other));
        }
    }
    out
}
