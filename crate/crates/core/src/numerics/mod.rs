//! Dense linear algebra, PCA, box-constrained QP and projected subgradient descent.

mod eigen;
mod matrix;
mod pca;
mod qp;
mod subgradient;

pub use eigen::{jacobi_eigen, solve_linear, SymmetricEigen};
pub use matrix::{all_finite, axpy, dot, norm, norm_sq, sub, Matrix};
pub use pca::{fit_pca, PcaProjection};
pub use qp::{solve_box_qp, solve_box_qp_with, BoxQp, QpOptions, QpSolution, QpSpectrum};
pub use subgradient::{projected_subgradient, StepRule, SubgradientOutcome};
