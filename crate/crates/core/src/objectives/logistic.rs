use nalgebra::DVector;
use rand::Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use super::FiniteSumObjective;
use crate::sparse::CsrMatrix;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LogisticError {
    #[error("label {value} at row {row} is not -1 or +1")]
    BadLabel { row: usize, value: f64 },
    #[error("{rows} feature rows but {labels} labels")]
    LengthMismatch { rows: usize, labels: usize },
    #[error("non-finite feature value")]
    NonFiniteFeature,
}

/// Binary logistic loss `(1/N) Σ log(1 + exp(-y_i z_i^T x))`.
#[derive(Debug, Clone)]
pub struct LogisticProblem {
    features: CsrMatrix,
    labels: Vec<f64>,
}

/// `log(1 + e^t)` without overflow.
fn softplus(t: f64) -> f64 {
    if t <= 0.0 {
        t.exp().ln_1p()
    } else {
        t + (-t).exp().ln_1p()
    }
}

/// `1 / (1 + e^{-t})` without overflow.
fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

impl LogisticProblem {
    pub fn new(features: CsrMatrix, labels: Vec<f64>) -> Result<Self, LogisticError> {
        if features.n_rows() != labels.len() {
            return Err(LogisticError::LengthMismatch {
                rows: features.n_rows(),
                labels: labels.len(),
            });
        }
        if let Some((row, &value)) = labels
            .iter()
            .enumerate()
            .find(|(_, &y)| y != 1.0 && y != -1.0)
        {
            return Err(LogisticError::BadLabel { row, value });
        }
        if features.values().iter().any(|v| !v.is_finite()) {
            return Err(LogisticError::NonFiniteFeature);
        }
        Ok(Self { features, labels })
    }

    /// Linearly separable data: `z_i ~ N(0, I_n)`, `y_i = sign(w^T z_i)` for a
    /// hidden direction `w ~ N(0, I_n)`.
    pub fn synthetic_separable<R: Rng>(n_samples: usize, dim: usize, rng: &mut R) -> Self {
        let w: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        let mut features = CsrMatrix::new(dim);
        let mut labels = Vec::with_capacity(n_samples);
        for _ in 0..n_samples {
            let z: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
            let margin: f64 = z.iter().zip(&w).map(|(a, b)| a * b).sum();
            labels.push(if margin >= 0.0 { 1.0 } else { -1.0 });
            features.push_row(z.into_iter().enumerate());
        }
        Self { features, labels }
    }

    pub fn features(&self) -> &CsrMatrix {
        &self.features
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    fn exponent(&self, j: usize, x: &DVector<f64>) -> f64 {
        -self.labels[j] * self.features.row_dot(j, x)
    }
}

impl FiniteSumObjective for LogisticProblem {
    fn num_components(&self) -> usize {
        self.labels.len()
    }

    fn dim(&self) -> usize {
        self.features.n_cols()
    }

    fn component_value(&self, j: usize, x: &DVector<f64>) -> f64 {
        softplus(self.exponent(j, x))
    }

    fn add_component_gradient(
        &self,
        j: usize,
        x: &DVector<f64>,
        scale: f64,
        out: &mut DVector<f64>,
    ) {
        let s = sigmoid(self.exponent(j, x));
        self.features
            .add_row_scaled(j, -scale * self.labels[j] * s, out);
    }
}
