//! Principal component analysis.
//!
//! Small problems diagonalize the `D×D` covariance with Jacobi rotations.
//! When `D` is large but the sample count is small the `m×m` Gram matrix is
//! diagonalized instead. When both are large, the top-`k` subspace is found
//! by block power iteration with a Rayleigh-Ritz step.

use serde::{Deserialize, Serialize};

use super::eigen::jacobi_eigen;
use super::matrix::{axpy, dot, norm, Matrix};
use crate::error::{Error, Result};

const JACOBI_MAX_DIM: usize = 400;
const SUBSPACE_OVERSAMPLE: usize = 10;
const SUBSPACE_MAX_ITERS: usize = 500;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaProjection {
    pub mean: Vec<f64>,
    /// `D×k`, orthonormal columns.
    pub basis: Matrix,
    /// Variance captured by each column, nonincreasing.
    pub explained_variance: Vec<f64>,
}

impl PcaProjection {
    pub fn input_dim(&self) -> usize {
        self.mean.len()
    }

    pub fn output_dim(&self) -> usize {
        self.basis.cols()
    }

    /// `basisᵀ (x − mean)`
    pub fn project(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.input_dim() {
            return Err(Error::Dimension(format!(
                "PCA expects input of length {}, got {}",
                self.input_dim(),
                x.len()
            )));
        }
        let centered: Vec<f64> = x.iter().zip(&self.mean).map(|(a, m)| a - m).collect();
        Ok(self.basis.tr_matvec(&centered))
    }

    pub fn reconstruct(&self, code: &[f64]) -> Result<Vec<f64>> {
        if code.len() != self.output_dim() {
            return Err(Error::Dimension(format!(
                "PCA code must have length {}, got {}",
                self.output_dim(),
                code.len()
            )));
        }
        let mut out = self.basis.matvec(code);
        for (o, m) in out.iter_mut().zip(&self.mean) {
            *o += m;
        }
        Ok(out)
    }

    /// Largest deviation of `basisᵀ·basis` from the identity.
    pub fn orthonormality_error(&self) -> f64 {
        let k = self.output_dim();
        let cols: Vec<Vec<f64>> = (0..k).map(|j| self.basis.col(j)).collect();
        let mut worst: f64 = 0.0;
        for i in 0..k {
            for j in i..k {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((dot(&cols[i], &cols[j]) - target).abs());
            }
        }
        worst
    }
}

pub fn fit_pca(rows: &Matrix, k: usize) -> Result<PcaProjection> {
    let (m, d) = (rows.rows(), rows.cols());
    if m < 2 {
        return Err(Error::InvalidArgument(format!("PCA needs at least 2 rows, got {m}")));
    }
    if k == 0 || k > (m - 1).min(d) {
        return Err(Error::InvalidArgument(format!(
            "PCA rank {k} must be in 1..={} for {m} rows of dimension {d}",
            (m - 1).min(d)
        )));
    }
    if !rows.is_finite() {
        return Err(Error::Numerical("PCA input has non-finite entries".into()));
    }

    let mut mean = vec![0.0; d];
    for i in 0..m {
        axpy(1.0, rows.row(i), &mut mean);
    }
    mean.iter_mut().for_each(|v| *v /= m as f64);
    let mut centered = rows.clone();
    for i in 0..m {
        for (v, mu) in centered.row_mut(i).iter_mut().zip(&mean) {
            *v -= mu;
        }
    }
    let denom = (m - 1) as f64;

    let (mut columns, variances) = if d <= JACOBI_MAX_DIM {
        covariance_route(&centered, k, denom)?
    } else if m <= JACOBI_MAX_DIM {
        gram_route(&centered, k, denom)?
    } else {
        subspace_route(&centered, k, denom)?
    };

    orthonormalize(&mut columns);
    for c in columns.iter_mut() {
        fix_sign(c);
    }
    let mut basis = Matrix::zeros(d, k);
    for (j, c) in columns.iter().enumerate() {
        basis.set_col(j, c);
    }
    let mut explained_variance: Vec<f64> = variances.into_iter().map(|v| v.max(0.0)).collect();
    // eigenvalues are sorted already; enforce the invariant against round-off
    for i in 1..explained_variance.len() {
        if explained_variance[i] > explained_variance[i - 1] {
            explained_variance[i] = explained_variance[i - 1];
        }
    }
    Ok(PcaProjection {
        mean,
        basis,
        explained_variance,
    })
}

fn covariance_route(centered: &Matrix, k: usize, denom: f64) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
    let mut cov = centered.transpose().matmul(centered);
    let d = cov.rows();
    for i in 0..d {
        for j in 0..d {
            cov[(i, j)] /= denom;
        }
    }
    let eig = jacobi_eigen(&cov)?;
    let cols = (0..k).map(|j| eig.vectors.col(j)).collect();
    Ok((cols, eig.values[..k].to_vec()))
}

fn gram_route(centered: &Matrix, k: usize, denom: f64) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
    let m = centered.rows();
    let mut gram = Matrix::zeros(m, m);
    for i in 0..m {
        for j in i..m {
            let v = dot(centered.row(i), centered.row(j)) / denom;
            gram[(i, j)] = v;
            gram[(j, i)] = v;
        }
    }
    let eig = jacobi_eigen(&gram)?;
    let scale_ref = eig.values[0].abs().max(f64::MIN_POSITIVE);
    let mut cols = Vec::with_capacity(k);
    for j in 0..k {
        let lambda = eig.values[j];
        if lambda > 1e-12 * scale_ref {
            let mut c = centered.tr_matvec(&eig.vectors.col(j));
            let s = 1.0 / (denom * lambda).sqrt();
            c.iter_mut().for_each(|v| *v *= s);
            cols.push(c);
        } else {
            // zero-variance direction: any unit vector orthogonal to the rest
            cols.push(Vec::new());
        }
    }
    complete_basis(&mut cols, centered.cols());
    Ok((cols, eig.values[..k].to_vec()))
}

fn subspace_route(centered: &Matrix, k: usize, denom: f64) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
    let (m, d) = (centered.rows(), centered.cols());
    let p = (k + SUBSPACE_OVERSAMPLE).min((m - 1).min(d));
    // deterministic start: the first p centered rows, then completion
    let mut q: Vec<Vec<f64>> = (0..p).map(|i| centered.row(i % m).to_vec()).collect();
    orthonormalize_or_complete(&mut q, d);

    let apply = |v: &[f64]| -> Vec<f64> {
        let xv = centered.matvec(v);
        let mut out = centered.tr_matvec(&xv);
        out.iter_mut().for_each(|x| *x /= denom);
        out
    };

    let mut prev: Vec<f64> = vec![f64::INFINITY; k];
    for _ in 0..SUBSPACE_MAX_ITERS {
        let z: Vec<Vec<f64>> = q.iter().map(|c| apply(c)).collect();
        let t = Matrix::from_fn(p, p, |i, j| dot(&q[i], &z[j]));
        let eig = jacobi_eigen(&t)?;
        // rotate the image onto the Ritz directions and re-orthonormalize
        let mut next: Vec<Vec<f64>> = (0..p)
            .map(|j| {
                let mut c = vec![0.0; d];
                for (i, zi) in z.iter().enumerate() {
                    axpy(eig.vectors[(i, j)], zi, &mut c);
                }
                c
            })
            .collect();
        orthonormalize_or_complete(&mut next, d);
        q = next;
        let ritz = eig.values;
        let converged = (0..k).all(|j| (ritz[j] - prev[j]).abs() <= 1e-12 * ritz[0].abs().max(1e-300));
        prev = ritz[..k].to_vec();
        if converged {
            break;
        }
    }
    // final Rayleigh-Ritz on the converged block
    let z: Vec<Vec<f64>> = q.iter().map(|c| apply(c)).collect();
    let t = Matrix::from_fn(p, p, |i, j| dot(&q[i], &z[j]));
    let eig = jacobi_eigen(&t)?;
    let cols = (0..k)
        .map(|j| {
            let mut c = vec![0.0; d];
            for (i, qi) in q.iter().enumerate() {
                axpy(eig.vectors[(i, j)], qi, &mut c);
            }
            c
        })
        .collect();
    Ok((cols, eig.values[..k].to_vec()))
}

/// Modified Gram-Schmidt, two passes.
fn orthonormalize(cols: &mut [Vec<f64>]) {
    for _ in 0..2 {
        for j in 0..cols.len() {
            let (done, rest) = cols.split_at_mut(j);
            let c = &mut rest[0];
            for prev in done.iter() {
                let proj = dot(prev, c);
                axpy(-proj, prev, c);
            }
            let nrm = norm(c);
            if nrm > 0.0 {
                c.iter_mut().for_each(|v| *v /= nrm);
            }
        }
    }
}

fn orthonormalize_or_complete(cols: &mut [Vec<f64>], d: usize) {
    orthonormalize(cols);
    for c in cols.iter_mut() {
        if (norm(c) - 1.0).abs() > 1e-6 {
            c.clear();
        }
    }
    complete_basis(cols, d);
}

/// Replaces empty columns by unit vectors orthogonal to all others.
fn complete_basis(cols: &mut [Vec<f64>], d: usize) {
    let mut candidate = 0usize;
    for j in 0..cols.len() {
        if !cols[j].is_empty() {
            continue;
        }
        loop {
            let mut e = vec![0.0; d];
            e[candidate % d] = 1.0;
            candidate += 1;
            for (i, other) in cols.iter().enumerate() {
                if i != j && !other.is_empty() {
                    let proj = dot(other, &e);
                    axpy(-proj, other, &mut e);
                }
            }
            let nrm = norm(&e);
            if nrm > 1e-3 {
                e.iter_mut().for_each(|v| *v /= nrm);
                cols[j] = e;
                break;
            }
            if candidate > 2 * d {
                panic!("cannot complete an orthonormal basis in dimension {d}");
            }
        }
    }
}

fn fix_sign(c: &mut [f64]) {
    let pivot = c
        .iter()
        .copied()
        .max_by(|a, b| a.abs().total_cmp(&b.abs()))
        .unwrap_or(0.0);
    if pivot < 0.0 {
        c.iter_mut().for_each(|v| *v = -*v);
    }
}
