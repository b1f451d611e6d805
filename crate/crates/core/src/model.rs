//! Model parameter types and the model JSON document.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{read_json, write_json};
use crate::numerics::{all_finite, dot, Matrix};
use crate::schema::AttributeSchema;
use crate::{BETA_FLOOR, SCORE_MAX, SCORE_MIN};

/// The three linear predictors: features→score, features→attributes,
/// attributes→score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearPredictors {
    pub w_xy: Vec<f64>,
    pub b_xy: f64,
    /// `d×n`; column `j` predicts attribute `j`.
    pub w_xa: Matrix,
    pub b_xa: Vec<f64>,
    pub w_ay: Vec<f64>,
    pub b_ay: f64,
}

impl LinearPredictors {
    pub fn zeros(d: usize, n: usize) -> Self {
        LinearPredictors {
            w_xy: vec![0.0; d],
            b_xy: 0.0,
            w_xa: Matrix::zeros(d, n),
            b_xa: vec![0.0; n],
            w_ay: vec![0.0; n],
            b_ay: 0.0,
        }
    }

    pub fn feature_dim(&self) -> usize {
        self.w_xy.len()
    }

    pub fn attribute_dim(&self) -> usize {
        self.w_ay.len()
    }

    pub fn validate(&self) -> Result<()> {
        let (d, n) = (self.feature_dim(), self.attribute_dim());
        if self.w_xa.rows() != d || self.w_xa.cols() != n || self.b_xa.len() != n {
            return Err(Error::Dimension(format!(
                "predictors: w_xy has {d} entries and w_ay {n}, but W_xa is {}x{} and b_xa has {}",
                self.w_xa.rows(),
                self.w_xa.cols(),
                self.b_xa.len()
            )));
        }
        let finite = all_finite(&self.w_xy)
            && self.w_xa.is_finite()
            && all_finite(&self.b_xa)
            && all_finite(&self.w_ay)
            && self.b_xy.is_finite()
            && self.b_ay.is_finite();
        if !finite {
            return Err(Error::Validation("predictors contain non-finite values".into()));
        }
        Ok(())
    }

    fn check_x(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.feature_dim() {
            return Err(Error::Dimension(format!(
                "feature vector has length {}, model expects {}",
                x.len(),
                self.feature_dim()
            )));
        }
        Ok(())
    }

    /// `w_xyᵀx + b_xy`
    pub fn score_from_features(&self, x: &[f64]) -> Result<f64> {
        self.check_x(x)?;
        Ok(dot(&self.w_xy, x) + self.b_xy)
    }

    /// `W_xaᵀx + b_xa`
    pub fn attributes_from_features(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_x(x)?;
        let mut r = self.w_xa.tr_matvec(x);
        for (ri, bi) in r.iter_mut().zip(&self.b_xa) {
            *ri += bi;
        }
        Ok(r)
    }

    /// `w_ayᵀa + b_ay`
    pub fn score_from_attributes(&self, a: &[f64]) -> Result<f64> {
        if a.len() != self.attribute_dim() {
            return Err(Error::Dimension(format!(
                "attribute vector has length {}, model expects {}",
                a.len(),
                self.attribute_dim()
            )));
        }
        Ok(dot(&self.w_ay, a) + self.b_ay)
    }
}

/// β₁, β₂, λ = diag(Λ)² and P; flattened as `z = [β₁; β₂; λ; vec(P)]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TradeoffParams {
    pub beta1: f64,
    pub beta2: f64,
    pub lambda: Vec<f64>,
    pub p: Matrix,
}

impl TradeoffParams {
    /// β₁ = β₂ = 1, λ = 1ⁿ, P = 0.
    pub fn initial(n: usize) -> Self {
        TradeoffParams {
            beta1: 1.0,
            beta2: 1.0,
            lambda: vec![1.0; n],
            p: Matrix::zeros(n, n),
        }
    }

    pub fn zeros(n: usize) -> Self {
        TradeoffParams {
            beta1: 0.0,
            beta2: 0.0,
            lambda: vec![0.0; n],
            p: Matrix::zeros(n, n),
        }
    }

    pub fn n(&self) -> usize {
        self.lambda.len()
    }

    pub fn z_len(n: usize) -> usize {
        2 + n + n * n
    }

    pub fn to_z(&self) -> Vec<f64> {
        let mut z = Vec::with_capacity(Self::z_len(self.n()));
        z.push(self.beta1);
        z.push(self.beta2);
        z.extend_from_slice(&self.lambda);
        z.extend(self.p.vec_col_major());
        z
    }

    pub fn from_z(z: &[f64], n: usize) -> Result<Self> {
        if z.len() != Self::z_len(n) {
            return Err(Error::Dimension(format!(
                "z must have length 2 + n + n² = {} for n = {n}, got {}",
                Self::z_len(n),
                z.len()
            )));
        }
        Ok(TradeoffParams {
            beta1: z[0],
            beta2: z[1],
            lambda: z[2..2 + n].to_vec(),
            p: Matrix::from_col_major(n, n, &z[2 + n..])?,
        })
    }

    /// Projects a flat `z` onto the feasible set: β ≥ β_floor, λ ≥ 0.
    pub fn project_z(z: &mut [f64], n: usize) {
        z[0] = z[0].max(BETA_FLOOR);
        z[1] = z[1].max(BETA_FLOOR);
        for l in &mut z[2..2 + n] {
            *l = l.max(0.0);
        }
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n();
        if self.p.rows() != n || self.p.cols() != n {
            return Err(Error::Dimension(format!(
                "P is {}x{}, expected {n}x{n}",
                self.p.rows(),
                self.p.cols()
            )));
        }
        if !(self.beta1 >= BETA_FLOOR && self.beta2 >= BETA_FLOOR) {
            return Err(Error::Validation(format!(
                "beta1 = {}, beta2 = {} must both be at least {BETA_FLOOR}",
                self.beta1, self.beta2
            )));
        }
        if self.lambda.iter().any(|l| !(*l >= 0.0) || !l.is_finite()) {
            return Err(Error::Validation(
                "lambda entries must be finite and nonnegative".into(),
            ));
        }
        if !self.p.is_finite() || !self.beta1.is_finite() || !self.beta2.is_finite() {
            return Err(Error::Validation(
                "trade-off parameters contain non-finite values".into(),
            ));
        }
        Ok(())
    }
}

/// Symmetric attribute co-occurrence frequencies in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Matrix", into = "Matrix")]
pub struct CooccurrenceMatrix(Matrix);

impl CooccurrenceMatrix {
    pub fn new(m: Matrix) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::Dimension("co-occurrence matrix must be square".into()));
        }
        if m.max_abs_asymmetry() != 0.0 {
            return Err(Error::Validation("co-occurrence matrix must be symmetric".into()));
        }
        if m.as_slice().iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::Validation("co-occurrence entries must lie in [0, 1]".into()));
        }
        Ok(CooccurrenceMatrix(m))
    }

    pub fn zeros(n: usize) -> Self {
        CooccurrenceMatrix(Matrix::zeros(n, n))
    }

    pub fn matrix(&self) -> &Matrix {
        &self.0
    }

    pub fn n(&self) -> usize {
        self.0.rows()
    }
}

impl TryFrom<Matrix> for CooccurrenceMatrix {
    type Error = Error;

    fn try_from(m: Matrix) -> Result<Self> {
        CooccurrenceMatrix::new(m)
    }
}

impl From<CooccurrenceMatrix> for Matrix {
    fn from(c: CooccurrenceMatrix) -> Matrix {
        c.0
    }
}

/// A trained continuous latent SVM.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClsvmModel {
    pub predictors: LinearPredictors,
    pub params: TradeoffParams,
    pub cooccurrence: CooccurrenceMatrix,
    pub schema: AttributeSchema,
    pub score_range: (f64, f64),
    /// Half-width of the band of scores treated as correct during training.
    pub epsilon: f64,
}

impl ClsvmModel {
    pub fn new(
        predictors: LinearPredictors,
        params: TradeoffParams,
        cooccurrence: CooccurrenceMatrix,
        schema: AttributeSchema,
        epsilon: f64,
    ) -> Self {
        ClsvmModel {
            predictors,
            params,
            cooccurrence,
            schema,
            score_range: (SCORE_MIN, SCORE_MAX),
            epsilon,
        }
    }

    pub fn n(&self) -> usize {
        self.predictors.attribute_dim()
    }

    /// Dimensional consistency only; numeric ranges are checked by [`ClsvmModel::validate`].
    pub fn check_dims(&self) -> Result<()> {
        self.predictors.validate()?;
        let n = self.n();
        if self.params.n() != n || self.params.p.rows() != n || self.params.p.cols() != n {
            return Err(Error::Dimension(format!(
                "trade-off parameters sized for {} attributes, predictors for {n}",
                self.params.n()
            )));
        }
        if self.cooccurrence.n() != n || self.schema.len() != n {
            return Err(Error::Dimension(format!(
                "co-occurrence is {}x{0} and schema has {} slots, predictors expect {n}",
                self.cooccurrence.n(),
                self.schema.len()
            )));
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.check_dims()?;
        self.params.validate()?;
        if !(self.epsilon > 0.0) {
            return Err(Error::Validation(format!(
                "epsilon must be positive, got {}",
                self.epsilon
            )));
        }
        let (lo, hi) = self.score_range;
        if !(lo < hi) {
            return Err(Error::Validation(format!("score range ({lo}, {hi}) is empty")));
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_json(path, self)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let m: ClsvmModel = read_json(path)?;
        m.validate()?;
        Ok(m)
    }
}
