//! Random full-row-rank equality constraints.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::projection::{ConstraintSystem, ProjectionError};
use crate::sampling::RngStream;

pub const MAX_ATTEMPTS: usize = 5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GenerationError {
    #[error("cannot build {m} constraints in dimension {n}")]
    BadDimensions { n: usize, m: usize },
    #[error("no full-rank constraint matrix after {0} attempts")]
    GenerationFailed(usize),
    #[error("KKT matrix is singular")]
    Singular,
    #[error(transparent)]
    Projection(#[from] ProjectionError),
}

/// `m = ⌊fraction · n⌋` standard normal constraints `(A, b)`.
pub fn random_constraints(
    n: usize,
    fraction: f64,
    rng: &mut RngStream,
) -> Result<(DMatrix<f64>, DVector<f64>), GenerationError> {
    if fraction.is_nan() || fraction <= 0.0 || n < 2 {
        return Err(GenerationError::BadDimensions { n, m: 0 });
    }
    let m = (fraction * n as f64).floor() as usize;
    random_constraints_with_rows(n, m, rng)
}

/// Standard normal `(A, b)` with `m` rows, redrawn until `AA^T` factors.
pub fn random_constraints_with_rows(
    n: usize,
    m: usize,
    rng: &mut RngStream,
) -> Result<(DMatrix<f64>, DVector<f64>), GenerationError> {
    if m < 1 || m >= n {
        return Err(GenerationError::BadDimensions { n, m });
    }
    for _ in 0..MAX_ATTEMPTS {
        let a = DMatrix::from_fn(m, n, |_, _| rng.rng().sample::<f64, _>(StandardNormal));
        let b = DVector::from_fn(m, |_, _| rng.rng().sample::<f64, _>(StandardNormal));
        match ConstraintSystem::new(a.clone(), b.clone()) {
            Ok(_) => return Ok((a, b)),
            Err(ProjectionError::RankDeficient { .. }) => continue,
            Err(e) => return Err(e.into()),
        }
    }
    Err(GenerationError::GenerationFailed(MAX_ATTEMPTS))
}
