use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use super::{FiniteSumObjective, SmoothFunction};
use crate::constraintgen::{random_constraints_with_rows, GenerationError};
use crate::projection::ConstraintSystem;
use crate::sampling::RngStream;

/// `½ x^T H x + c^T x` with `H` symmetric positive definite.
#[derive(Debug, Clone)]
pub struct QuadraticFunction {
    h: DMatrix<f64>,
    c: DVector<f64>,
}

impl QuadraticFunction {
    pub fn new(h: DMatrix<f64>, c: DVector<f64>) -> Self {
        assert_eq!(h.nrows(), c.len());
        assert_eq!(h.ncols(), c.len());
        Self { h, c }
    }

    /// `H = M^T M / n + I` and `c` with standard normal entries. The
    /// spectrum of `H` stays within roughly `[1, 5]`.
    pub fn random<R: Rng>(n: usize, rng: &mut R) -> Self {
        let m = DMatrix::<f64>::from_fn(n, n, |_, _| rng.sample(StandardNormal));
        let h = m.tr_mul(&m) / n as f64 + DMatrix::identity(n, n);
        let c = DVector::from_fn(n, |_, _| rng.sample(StandardNormal));
        Self { h, c }
    }

    pub fn hessian(&self) -> &DMatrix<f64> {
        &self.h
    }

    pub fn linear(&self) -> &DVector<f64> {
        &self.c
    }

    /// Largest eigenvalue of `H`, the gradient Lipschitz constant.
    pub fn lipschitz(&self) -> f64 {
        self.h
            .clone()
            .symmetric_eigenvalues()
            .iter()
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

impl SmoothFunction for QuadraticFunction {
    fn dim(&self) -> usize {
        self.c.len()
    }

    fn value(&self, x: &DVector<f64>) -> f64 {
        0.5 * x.dot(&(&self.h * x)) + self.c.dot(x)
    }

    fn add_gradient(&self, x: &DVector<f64>, scale: f64, out: &mut DVector<f64>) {
        out.gemv(scale, &self.h, x, 1.0);
        out.axpy(scale, &self.c, 1.0);
    }
}

/// Finite-sum quadratic whose components share `H` and carry linear terms
/// `c + w_j` with `Σ_j w_j = 0`.
#[derive(Debug, Clone)]
pub struct QuadraticProblem {
    base: QuadraticFunction,
    offsets: Vec<DVector<f64>>,
}

impl QuadraticProblem {
    pub fn new<R: Rng>(base: QuadraticFunction, n_components: usize, rng: &mut R) -> Self {
        assert!(n_components > 0);
        let n = base.dim();
        let mut offsets: Vec<DVector<f64>> = (0..n_components)
            .map(|_| DVector::from_fn(n, |_, _| rng.sample(StandardNormal)))
            .collect();
        let mean = offsets.iter().fold(DVector::zeros(n), |acc, w| acc + w) / n_components as f64;
        for w in &mut offsets {
            *w -= &mean;
        }
        Self { base, offsets }
    }

    pub fn base(&self) -> &QuadraticFunction {
        &self.base
    }

    /// Linear term of component `j`.
    pub fn component_linear(&self, j: usize) -> DVector<f64> {
        &self.base.c + &self.offsets[j]
    }
}

impl FiniteSumObjective for QuadraticProblem {
    fn num_components(&self) -> usize {
        self.offsets.len()
    }

    fn dim(&self) -> usize {
        self.base.dim()
    }

    fn component_value(&self, j: usize, x: &DVector<f64>) -> f64 {
        self.base.value(x) + self.offsets[j].dot(x)
    }

    fn add_component_gradient(
        &self,
        j: usize,
        x: &DVector<f64>,
        scale: f64,
        out: &mut DVector<f64>,
    ) {
        self.base.add_gradient(x, scale, out);
        out.axpy(scale, &self.offsets[j], 1.0);
    }

    fn value(&self, x: &DVector<f64>) -> f64 {
        self.base.value(x)
    }

    fn full_gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        self.base.gradient(x)
    }
}

/// A random equality-constrained QP together with its KKT solution.
#[derive(Debug, Clone)]
pub struct QuadraticOracle {
    pub problem: QuadraticProblem,
    pub system: ConstraintSystem,
    pub x_star: DVector<f64>,
}

/// Draws `H`, `c`, `(A, b)` from `seed` and solves
/// `[H A^T; A 0] (x, λ) = (-c, b)` with a dense LU.
pub fn quadratic_oracle(
    n: usize,
    m: usize,
    n_components: usize,
    seed: u64,
) -> Result<QuadraticOracle, GenerationError> {
    if m == 0 || m >= n {
        return Err(GenerationError::BadDimensions { n, m });
    }
    let mut rng = RngStream::new(seed);
    let base = QuadraticFunction::random(n, rng.rng());
    let (a, b) = random_constraints_with_rows(n, m, &mut rng)?;
    let mut kkt = DMatrix::zeros(n + m, n + m);
    kkt.view_mut((0, 0), (n, n)).copy_from(base.hessian());
    kkt.view_mut((0, n), (n, m)).copy_from(&a.transpose());
    kkt.view_mut((n, 0), (m, n)).copy_from(&a);
    let mut rhs = DVector::zeros(n + m);
    rhs.rows_mut(0, n).copy_from(&(-base.linear()));
    rhs.rows_mut(n, m).copy_from(&b);
    let sol = kkt.lu().solve(&rhs).ok_or(GenerationError::Singular)?;
    let x_star = sol.rows(0, n).into_owned();
    let system = ConstraintSystem::new(a, b)?;
    let problem = QuadraticProblem::new(base, n_components, rng.rng());
    Ok(QuadraticOracle {
        problem,
        system,
        x_star,
    })
}
