//! Box-constrained quadratic maximization.
//!
//! Maximizes `½·aᵀHa + gᵀa` over `lo ≤ a ≤ hi` with accelerated projected
//! gradient ascent (step `1/L`, `L` the spectral radius of `H`). Concave
//! problems get a single run followed by an active-set Newton polish, which
//! lands on the exact maximizer to machine precision. Indefinite problems
//! take the best of several seeded starts and are flagged approximate.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::eigen::{jacobi_eigen, solve_linear};
use super::matrix::{all_finite, dot, Matrix};
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct BoxQp {
    h: Matrix,
    g: Vec<f64>,
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl BoxQp {
    /// Builds a problem; `h` is symmetrized on construction.
    pub fn new(mut h: Matrix, g: Vec<f64>, lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        let n = g.len();
        if h.rows() != n || h.cols() != n || lo.len() != n || hi.len() != n {
            return Err(Error::Dimension(format!(
                "box QP: H is {}x{}, g/lo/hi have lengths {}/{}/{}",
                h.rows(),
                h.cols(),
                n,
                lo.len(),
                hi.len()
            )));
        }
        if !h.is_finite() || !all_finite(&g) || !all_finite(&lo) || !all_finite(&hi) {
            return Err(Error::Numerical("box QP has non-finite entries".into()));
        }
        if let Some(i) = (0..n).find(|&i| lo[i] > hi[i]) {
            return Err(Error::InvalidArgument(format!(
                "box QP bound {i}: lo {} > hi {}",
                lo[i], hi[i]
            )));
        }
        h.symmetrize();
        Ok(BoxQp { h, g, lo, hi })
    }

    /// Unit box `[0, 1]ⁿ`.
    pub fn unit_box(h: Matrix, g: Vec<f64>) -> Result<Self> {
        let n = g.len();
        BoxQp::new(h, g, vec![0.0; n], vec![1.0; n])
    }

    pub fn dim(&self) -> usize {
        self.g.len()
    }

    pub fn hessian(&self) -> &Matrix {
        &self.h
    }

    pub fn linear(&self) -> &[f64] {
        &self.g
    }

    pub fn lower(&self) -> &[f64] {
        &self.lo
    }

    pub fn upper(&self) -> &[f64] {
        &self.hi
    }

    pub fn value(&self, a: &[f64]) -> f64 {
        0.5 * self.h.quad_form(a) + dot(&self.g, a)
    }

    pub fn gradient(&self, a: &[f64]) -> Vec<f64> {
        let mut grad = self.h.matvec(a);
        for (gi, li) in grad.iter_mut().zip(&self.g) {
            *gi += li;
        }
        grad
    }

    pub fn project(&self, a: &mut [f64]) {
        for ((ai, lo), hi) in a.iter_mut().zip(&self.lo).zip(&self.hi) {
            *ai = ai.clamp(*lo, *hi);
        }
    }

    pub fn is_feasible(&self, a: &[f64]) -> bool {
        a.len() == self.dim()
            && a.iter()
                .zip(self.lo.iter().zip(&self.hi))
                .all(|(ai, (lo, hi))| *ai >= *lo && *ai <= *hi)
    }

    /// Infinity norm of `P(a + ∇f(a)) − a`; zero exactly at KKT points.
    pub fn kkt_residual(&self, a: &[f64]) -> f64 {
        let grad = self.gradient(a);
        let mut stepped: Vec<f64> = a.iter().zip(&grad).map(|(x, g)| x + g).collect();
        self.project(&mut stepped);
        stepped.iter().zip(a).fold(0.0f64, |acc, (s, x)| acc.max((s - x).abs()))
    }
}

#[derive(Debug, Clone, Copy)]
pub struct QpOptions {
    /// Random-start runs used when `H` is indefinite.
    pub restarts: usize,
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
}

impl Default for QpOptions {
    fn default() -> Self {
        QpOptions {
            restarts: 5,
            tol: 1e-8,
            max_iter: 500,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct QpSolution {
    pub argmax: Vec<f64>,
    pub value: f64,
    /// Set when `H` is indefinite: the result is the best local maximizer found.
    pub approximate: bool,
    pub iterations: usize,
}

/// Curvature summary of a Hessian: gradient Lipschitz constant and concavity.
/// Problems sharing a Hessian can share one spectrum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QpSpectrum {
    pub lipschitz: f64,
    pub concave: bool,
}

impl QpSpectrum {
    pub fn of(h: &Matrix) -> Result<Self> {
        if h.rows() == 0 {
            return Ok(QpSpectrum {
                lipschitz: 1e-12,
                concave: true,
            });
        }
        let mut sym = h.clone();
        sym.symmetrize();
        let eig = jacobi_eigen(&sym)?;
        let spectral = eig.values.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
        Ok(QpSpectrum {
            lipschitz: spectral.max(1e-12),
            concave: eig.values[0] <= 1e-12 * spectral.max(1.0),
        })
    }
}

pub fn solve_box_qp(problem: &BoxQp, opts: &QpOptions) -> Result<QpSolution> {
    let spectrum = QpSpectrum::of(&problem.h)?;
    solve_box_qp_with(problem, &spectrum, opts)
}

/// As [`solve_box_qp`], with the spectrum of `problem.hessian()` supplied.
pub fn solve_box_qp_with(problem: &BoxQp, spectrum: &QpSpectrum, opts: &QpOptions) -> Result<QpSolution> {
    let n = problem.dim();
    if n == 0 {
        return Ok(QpSolution {
            argmax: Vec::new(),
            value: 0.0,
            approximate: false,
            iterations: 0,
        });
    }
    let QpSpectrum { lipschitz, concave } = *spectrum;

    let mid: Vec<f64> = problem.lo.iter().zip(&problem.hi).map(|(l, h)| 0.5 * (l + h)).collect();

    if concave {
        let (mut a, iters) = ascend(problem, mid, lipschitz, opts);
        newton_polish(problem, &mut a);
        let value = problem.value(&a);
        if !value.is_finite() {
            return Err(Error::Numerical("box QP value is not finite".into()));
        }
        return Ok(QpSolution {
            argmax: a,
            value,
            approximate: false,
            iterations: iters,
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let starts: Vec<Vec<f64>> = (0..opts.restarts.max(1))
        .map(|k| {
            if k == 0 {
                mid.clone()
            } else {
                (0..n)
                    .map(|i| {
                        let (l, h) = (problem.lo[i], problem.hi[i]);
                        if l < h {
                            rng.random_range(l..=h)
                        } else {
                            l
                        }
                    })
                    .collect()
            }
        })
        .collect();

    let mut best: Option<QpSolution> = None;
    for start in starts {
        let (a, iters) = ascend(problem, start, lipschitz, opts);
        let value = problem.value(&a);
        if !value.is_finite() {
            return Err(Error::Numerical("box QP value is not finite".into()));
        }
        // strict comparison keeps the lowest restart index on ties
        if best.as_ref().is_none_or(|b| value > b.value) {
            best = Some(QpSolution {
                argmax: a,
                value,
                approximate: true,
                iterations: iters,
            });
        }
    }
    Ok(best.expect("at least one restart"))
}

/// FISTA-style projected gradient ascent with function-value restarts.
fn ascend(problem: &BoxQp, start: Vec<f64>, lipschitz: f64, opts: &QpOptions) -> (Vec<f64>, usize) {
    let step = 1.0 / lipschitz;
    let mut x = start;
    problem.project(&mut x);
    let mut fx = problem.value(&x);
    let mut y = x.clone();
    let mut t = 1.0f64;
    let mut iters = 0;
    while iters < opts.max_iter {
        iters += 1;
        let grad = problem.gradient(&y);
        let mut next: Vec<f64> = y.iter().zip(&grad).map(|(v, g)| v + step * g).collect();
        problem.project(&mut next);
        let fnext = problem.value(&next);
        if fnext < fx {
            // momentum overshot: restart from the last accepted iterate
            if y == x {
                break;
            }
            y.clone_from(&x);
            t = 1.0;
            continue;
        }
        let moved = next.iter().zip(&x).fold(0.0f64, |acc, (a, b)| acc.max((a - b).abs()));
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        let beta = (t - 1.0) / t_next;
        y = next.iter().zip(&x).map(|(n, o)| n + beta * (n - o)).collect();
        x = next;
        fx = fnext;
        t = t_next;
        if moved <= opts.tol {
            break;
        }
    }
    (x, iters)
}

/// Active-set Newton refinement for concave problems. Only ever accepts
/// feasible points that do not lower the objective.
fn newton_polish(problem: &BoxQp, a: &mut Vec<f64>) {
    let n = problem.dim();
    for _ in 0..(2 * n + 2) {
        let grad = problem.gradient(a);
        let free: Vec<usize> = (0..n)
            .filter(|&i| {
                let (l, h) = (problem.lo[i], problem.hi[i]);
                if l == h {
                    return false;
                }
                (a[i] > l && a[i] < h) || (a[i] <= l && grad[i] > 0.0) || (a[i] >= h && grad[i] < 0.0)
            })
            .collect();
        if free.is_empty() {
            return;
        }
        let hff = Matrix::from_fn(free.len(), free.len(), |r, c| problem.h[(free[r], free[c])]);
        let rhs: Vec<f64> = free.iter().map(|&i| -grad[i]).collect();
        let Some(delta) = solve_linear(&hff, &rhs) else {
            return;
        };
        // largest step in [0, 1] keeping the free coordinates inside the box
        let mut alpha = 1.0f64;
        for (k, &i) in free.iter().enumerate() {
            let d = delta[k];
            if d > 0.0 {
                alpha = alpha.min((problem.hi[i] - a[i]) / d);
            } else if d < 0.0 {
                alpha = alpha.min((problem.lo[i] - a[i]) / d);
            }
        }
        let alpha = alpha.max(0.0);
        let mut candidate = a.clone();
        for (k, &i) in free.iter().enumerate() {
            candidate[i] += alpha * delta[k];
        }
        problem.project(&mut candidate);
        let before = problem.value(a);
        let after = problem.value(&candidate);
        if !(after >= before - 1e-15 * before.abs().max(1.0)) {
            return;
        }
        *a = candidate;
        if alpha >= 1.0 && problem.kkt_residual(a) <= 1e-13 * (1.0 + before.abs()) {
            return;
        }
        if alpha == 0.0 && after <= before {
            return;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scaled_identity(n: usize, s: f64) -> Matrix {
        let mut m = Matrix::identity(n);
        for i in 0..n {
            m[(i, i)] = s;
        }
        m
    }

    #[test]
    fn concave_zero_linear_term_peaks_at_origin() {
        let qp = BoxQp::unit_box(scaled_identity(4, -2.0), vec![0.0; 4]).unwrap();
        let sol = solve_box_qp(&qp, &QpOptions::default()).unwrap();
        assert!(sol.argmax.iter().all(|v| v.abs() < 1e-12));
        assert!(!sol.approximate);
    }

    #[test]
    fn concave_with_unit_peak() {
        let qp = BoxQp::unit_box(scaled_identity(5, -2.0), vec![2.0; 5]).unwrap();
        let sol = solve_box_qp(&qp, &QpOptions::default()).unwrap();
        assert!(sol.argmax.iter().all(|v| (v - 1.0).abs() < 1e-12));
        assert!((sol.value - 5.0).abs() < 1e-12);
    }

    #[test]
    fn linear_objective_goes_to_corner() {
        let qp = BoxQp::unit_box(Matrix::zeros(3, 3), vec![1.0, -1.0, 0.5]).unwrap();
        let sol = solve_box_qp(&qp, &QpOptions::default()).unwrap();
        assert_eq!(sol.argmax, vec![1.0, 0.0, 1.0]);
    }

    #[test]
    fn indefinite_is_flagged_and_finds_corner() {
        // convex bowl: maximum at a corner farthest from the center
        let h = scaled_identity(2, 2.0);
        let qp = BoxQp::unit_box(h, vec![-0.9, -1.1]).unwrap();
        let sol = solve_box_qp(&qp, &QpOptions::default()).unwrap();
        assert!(sol.approximate);
        assert!(qp.is_feasible(&sol.argmax));
        // corners: (0,0)=0, (1,0)=0.1, (0,1)=-0.1, (1,1)=0
        assert!((sol.value - 0.1).abs() < 1e-9, "{}", sol.value);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(BoxQp::unit_box(scaled_identity(2, f64::NAN), vec![0.0; 2]).is_err());
        assert!(BoxQp::new(Matrix::identity(1), vec![0.0], vec![1.0], vec![0.0]).is_err());
        assert!(BoxQp::unit_box(Matrix::identity(2), vec![0.0; 3]).is_err());
    }
}
