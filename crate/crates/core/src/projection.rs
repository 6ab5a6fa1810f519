//! The affine feasible set `S = {x : Ax = b}` and projections onto it.
//!
//! A [`ConstraintSystem`] caches the Gram matrix `AA^T` together with its
//! Cholesky factor. Exact projections go through the factor; inexact
//! projections run an unpreconditioned conjugate gradient on the same Gram
//! system and stop on a residual test, keeping the residual vector so callers
//! can relate it to the infeasibility of the projected point.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

/// Pivots of the Gram factorization below `RANK_TOL * max(diag(AA^T))` mark
/// `A` as rank deficient.
pub const RANK_TOL: f64 = 1e-12;

/// Inexact projection is skipped when `‖Ay - b‖` is at or below this value.
pub const SKIP_TOL: f64 = 1e-12;

/// Floor and ceiling of the relative CG tolerance.
pub const CG_TAU_MIN: f64 = 1e-10;
pub const CG_TAU_MAX: f64 = 1e-3;

/// A search direction with `p^T G p <= CG_BREAKDOWN * ‖p‖²` aborts CG.
pub const CG_BREAKDOWN: f64 = 1e-14;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProjectionError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("constraint matrix is rank deficient (pivot {pivot:e} at row {row})")]
    RankDeficient { row: usize, pivot: f64 },
    #[error("non-finite input to {0}")]
    NonFinite(&'static str),
    #[error("conjugate gradient breakdown at iteration {iteration} (curvature {curvature:e})")]
    CgBreakdown { iteration: usize, curvature: f64 },
}

/// Result of projecting a point onto `S`.
#[derive(Debug, Clone)]
pub struct ProjectionOutcome {
    pub point: DVector<f64>,
    /// `r(y) = AA^T λ̃ - (Ay - b)`, the residual of the Gram system.
    pub residual: DVector<f64>,
    pub residual_norm: f64,
    pub inner_iterations: usize,
    pub skipped: bool,
    /// CG reached its iteration cap short of the tolerance and the cached
    /// Cholesky factor supplied `λ̃` instead.
    pub fallback: bool,
}

/// `Ay - b` and its Euclidean norm.
#[derive(Debug, Clone)]
pub struct InfeasibilityMeasure {
    pub vector_part: DVector<f64>,
    pub norm_part: f64,
}

/// Immutable description of the feasible set plus its cached factorization.
#[derive(Debug, Clone)]
pub struct ConstraintSystem {
    a: DMatrix<f64>,
    b: DVector<f64>,
    gram: DMatrix<f64>,
    chol: DMatrix<f64>,
}

impl ConstraintSystem {
    pub fn new(a: DMatrix<f64>, b: DVector<f64>) -> Result<Self, ProjectionError> {
        let (m, n) = a.shape();
        if m == 0 || m >= n {
            return Err(ProjectionError::DimensionMismatch(format!(
                "need 0 < m < n, got m={m}, n={n}"
            )));
        }
        if b.len() != m {
            return Err(ProjectionError::DimensionMismatch(format!(
                "b has length {}, expected {m}",
                b.len()
            )));
        }
        if a.iter().chain(b.iter()).any(|v| !v.is_finite()) {
            return Err(ProjectionError::NonFinite("build_constraint_system"));
        }
        let gram = &a * a.transpose();
        let chol = cholesky(&gram)?;
        Ok(Self { a, b, gram, chol })
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DVector<f64> {
        &self.b
    }

    /// Lower-triangular factor `L` with `L L^T = AA^T`.
    pub fn chol(&self) -> &DMatrix<f64> {
        &self.chol
    }

    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    pub fn rows(&self) -> usize {
        self.a.nrows()
    }

    pub fn cols(&self) -> usize {
        self.a.ncols()
    }

    fn check_point(&self, y: &DVector<f64>, op: &'static str) -> Result<(), ProjectionError> {
        if y.len() != self.cols() {
            return Err(ProjectionError::DimensionMismatch(format!(
                "{op}: vector has length {}, expected {}",
                y.len(),
                self.cols()
            )));
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(ProjectionError::NonFinite(op));
        }
        Ok(())
    }

    /// Solves `AA^T w = rhs` with the cached factor.
    pub fn solve_gram(&self, rhs: &DVector<f64>) -> DVector<f64> {
        let mut w = rhs.clone();
        forward_substitute(&self.chol, &mut w);
        backward_substitute_transposed(&self.chol, &mut w);
        w
    }

    pub fn infeasibility(&self, y: &DVector<f64>) -> Result<InfeasibilityMeasure, ProjectionError> {
        self.check_point(y, "infeasibility")?;
        let vector_part = &self.a * y - &self.b;
        let norm_part = vector_part.norm();
        Ok(InfeasibilityMeasure {
            vector_part,
            norm_part,
        })
    }

    /// Orthogonal projection `y - A^T (AA^T)^{-1} (Ay - b)`.
    pub fn project_exact(&self, y: &DVector<f64>) -> Result<ProjectionOutcome, ProjectionError> {
        self.check_point(y, "project_exact")?;
        let rhs = &self.a * y - &self.b;
        let lambda = self.solve_gram(&rhs);
        let point = y - self.a.tr_mul(&lambda);
        let residual = &self.gram * &lambda - &rhs;
        Ok(ProjectionOutcome {
            point,
            residual_norm: residual.norm(),
            residual,
            inner_iterations: 0,
            skipped: false,
            fallback: false,
        })
    }

    /// Inexact projection whose Gram residual is driven below
    /// `tau * ‖Ay - b‖`, with `tau` derived from `abs_bound` by
    /// [`cg_tolerance`]. CG starts from zero and is capped at `m` iterations;
    /// if the true residual still misses the target, `λ̃` comes from the
    /// Cholesky factor.
    pub fn project_inexact(
        &self,
        y: &DVector<f64>,
        abs_bound: f64,
    ) -> Result<ProjectionOutcome, ProjectionError> {
        self.check_point(y, "project_inexact")?;
        let rhs = &self.a * y - &self.b;
        let rhs_norm = rhs.norm();
        if rhs_norm <= SKIP_TOL {
            // λ̃ = 0, so r(y) = -(Ay - b).
            return Ok(ProjectionOutcome {
                point: y.clone(),
                residual: -rhs,
                residual_norm: rhs_norm,
                inner_iterations: 0,
                skipped: true,
                fallback: false,
            });
        }
        let tau = cg_tolerance(abs_bound, rhs_norm);
        let (mut lambda, iterations) = conjugate_gradient(&self.gram, &rhs, tau, self.rows())?;
        let mut residual = &self.gram * &lambda - &rhs;
        // rounding can stop CG short of the target within m steps, and the
        // tau floor can leave it above `abs_bound`
        let fallback = residual.norm() > (tau * rhs_norm).min(abs_bound);
        if fallback {
            lambda = self.solve_gram(&rhs);
            residual = &self.gram * &lambda - &rhs;
        }
        let point = y - self.a.tr_mul(&lambda);
        Ok(ProjectionOutcome {
            point,
            residual_norm: residual.norm(),
            residual,
            inner_iterations: iterations,
            skipped: false,
            fallback,
        })
    }

    /// `P_A v = v - A^T (AA^T)^{-1} A v`, the projector onto `null(A)`.
    pub fn apply_pa(&self, v: &DVector<f64>) -> Result<DVector<f64>, ProjectionError> {
        self.check_point(v, "apply_pa")?;
        let w = self.solve_gram(&(&self.a * v));
        Ok(v - self.a.tr_mul(&w))
    }

    /// `D w = A^T (AA^T)^{-1} w` for `w` of length `m`.
    pub fn apply_d(&self, w: &DVector<f64>) -> Result<DVector<f64>, ProjectionError> {
        if w.len() != self.rows() {
            return Err(ProjectionError::DimensionMismatch(format!(
                "apply_d: vector has length {}, expected {}",
                w.len(),
                self.rows()
            )));
        }
        Ok(self.a.tr_mul(&self.solve_gram(w)))
    }

    /// The minimum-norm feasible point `A^T (AA^T)^{-1} b`.
    pub fn projected_origin(&self) -> DVector<f64> {
        self.a.tr_mul(&self.solve_gram(&self.b))
    }
}

/// Relative CG tolerance for a requested absolute residual bound:
/// `max{1e-10, min{abs_bound / rhs_norm, 1e-3}}`.
pub fn cg_tolerance(abs_bound: f64, rhs_norm: f64) -> f64 {
    let ratio = if rhs_norm > 0.0 {
        abs_bound / rhs_norm
    } else {
        f64::INFINITY
    };
    CG_TAU_MIN.max(ratio.min(CG_TAU_MAX))
}

/// Dense Cholesky `G = L L^T` with a relative pivot test.
fn cholesky(g: &DMatrix<f64>) -> Result<DMatrix<f64>, ProjectionError> {
    let m = g.nrows();
    let max_diag = g.diagonal().iter().cloned().fold(0.0_f64, f64::max);
    let threshold = RANK_TOL * max_diag;
    let mut l = DMatrix::<f64>::zeros(m, m);
    for j in 0..m {
        let mut pivot = g[(j, j)];
        for k in 0..j {
            pivot -= l[(j, k)] * l[(j, k)];
        }
        if pivot.is_nan() || pivot <= threshold {
            return Err(ProjectionError::RankDeficient { row: j, pivot });
        }
        let ljj = pivot.sqrt();
        l[(j, j)] = ljj;
        for i in (j + 1)..m {
            let mut s = g[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / ljj;
        }
    }
    Ok(l)
}

fn forward_substitute(l: &DMatrix<f64>, w: &mut DVector<f64>) {
    for i in 0..w.len() {
        let mut s = w[i];
        for k in 0..i {
            s -= l[(i, k)] * w[k];
        }
        w[i] = s / l[(i, i)];
    }
}

fn backward_substitute_transposed(l: &DMatrix<f64>, w: &mut DVector<f64>) {
    for i in (0..w.len()).rev() {
        let mut s = w[i];
        for k in (i + 1)..w.len() {
            s -= l[(k, i)] * w[k];
        }
        w[i] = s / l[(i, i)];
    }
}

/// Unpreconditioned CG from the zero vector. Stops once the recursively
/// updated residual satisfies `‖res‖ <= tau * ‖rhs‖` or after `max_iter`
/// iterations.
fn conjugate_gradient(
    g: &DMatrix<f64>,
    rhs: &DVector<f64>,
    tau: f64,
    max_iter: usize,
) -> Result<(DVector<f64>, usize), ProjectionError> {
    let target = tau * rhs.norm();
    let mut x = DVector::zeros(rhs.len());
    let mut res = rhs.clone();
    let mut dir = res.clone();
    let mut rr = res.norm_squared();
    let mut gp = DVector::zeros(rhs.len());
    let mut iterations = 0;
    while iterations < max_iter && rr.sqrt() > target {
        gp.gemv(1.0, g, &dir, 0.0);
        let curvature = dir.dot(&gp);
        if curvature.is_nan() || curvature <= CG_BREAKDOWN * dir.norm_squared() {
            return Err(ProjectionError::CgBreakdown {
                iteration: iterations,
                curvature,
            });
        }
        let step = rr / curvature;
        x.axpy(step, &dir, 1.0);
        res.axpy(-step, &gp, 1.0);
        let rr_next = res.norm_squared();
        dir *= rr_next / rr;
        dir += &res;
        rr = rr_next;
        iterations += 1;
    }
    Ok((x, iterations))
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{dmatrix, dvector};

    fn line() -> ConstraintSystem {
        ConstraintSystem::new(dmatrix![1.0, 1.0], dvector![2.0]).unwrap()
    }

    #[test]
    fn single_row_factor() {
        let sys = line();
        assert_eq!(sys.gram()[(0, 0)], 2.0);
        assert!((sys.chol()[(0, 0)] - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn orthonormal_rows_give_identity_factor() {
        let sys = ConstraintSystem::new(dmatrix![1.0, 0.0, 0.0; 0.0, 1.0, 0.0], dvector![0.0, 0.0])
            .unwrap();
        assert_eq!(sys.chol(), &DMatrix::<f64>::identity(2, 2));
    }

    #[test]
    fn duplicate_rows_are_rank_deficient() {
        let err = ConstraintSystem::new(dmatrix![1.0, 1.0; 2.0, 2.0], dvector![0.0, 0.0]);
        // m = n here, which is rejected first; use a wide matrix to reach the pivot test
        assert!(matches!(err, Err(ProjectionError::DimensionMismatch(_))));
        let err = ConstraintSystem::new(dmatrix![1.0, 1.0, 0.0; 2.0, 2.0, 0.0], dvector![0.0, 0.0]);
        assert!(matches!(
            err,
            Err(ProjectionError::RankDeficient { row: 1, .. })
        ));
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(matches!(
            ConstraintSystem::new(dmatrix![1.0, 1.0], dvector![1.0, 2.0]),
            Err(ProjectionError::DimensionMismatch(_))
        ));
        assert!(matches!(
            ConstraintSystem::new(dmatrix![1.0, f64::NAN], dvector![1.0]),
            Err(ProjectionError::NonFinite(_))
        ));
    }

    #[test]
    fn projects_origin_onto_line() {
        let sys = line();
        let out = sys.project_exact(&dvector![0.0, 0.0]).unwrap();
        assert!((out.point - dvector![1.0, 1.0]).norm() < 1e-15);
        assert_eq!(out.inner_iterations, 0);
        assert!(out.residual_norm <= 1e-10 * 3.0);
    }

    #[test]
    fn feasible_point_is_fixed_and_projection_idempotent() {
        let sys = line();
        let y = dvector![3.0, -1.0];
        let out = sys.project_exact(&y).unwrap();
        assert!((&out.point - &y).norm() < 1e-14);
        let z = dvector![0.3, 7.0];
        let once = sys.project_exact(&z).unwrap().point;
        let twice = sys.project_exact(&once).unwrap().point;
        assert!((once - twice).norm() < 1e-10);
    }

    #[test]
    fn infeasibility_of_origin() {
        let m = line().infeasibility(&dvector![0.0, 0.0]).unwrap();
        assert_eq!(m.vector_part, dvector![-2.0]);
        assert_eq!(m.norm_part, 2.0);
        assert_eq!(
            line().infeasibility(&dvector![1.0, 1.0]).unwrap().norm_part,
            0.0
        );
    }

    #[test]
    fn tolerance_clamps() {
        // η = 0.5, e(x_k) = 1, μ = 0.1, ‖Ay - b‖ = 10
        assert_eq!(cg_tolerance(0.5 * 1.0 + 0.1, 10.0), 1e-3);
        assert_eq!(cg_tolerance(0.0, 10.0), 1e-10);
        assert_eq!(cg_tolerance(1e-5, 1.0), 1e-5);
    }

    #[test]
    fn nearly_feasible_input_is_skipped() {
        let sys = line();
        let y = dvector![1.0 + 1e-13 / 2.0, 1.0 + 1e-13 / 2.0];
        let out = sys.project_inexact(&y, 1.0).unwrap();
        assert!(out.skipped);
        assert_eq!(out.point, y);
        assert!((out.residual_norm - 1e-13).abs() < 1e-15);
    }

    #[test]
    fn zero_bound_is_effectively_exact() {
        let a = dmatrix![1.0, 2.0, 0.0, -1.0; 0.5, -1.0, 3.0, 1.0; 2.0, 0.0, 1.0, 1.0];
        let sys = ConstraintSystem::new(a, dvector![1.0, -2.0, 0.5]).unwrap();
        let y = dvector![4.0, -3.0, 2.0, 9.0];
        let before = sys.infeasibility(&y).unwrap().norm_part;
        let out = sys.project_inexact(&y, 0.0).unwrap();
        assert!(!out.skipped);
        assert!(out.inner_iterations <= 3);
        let after = sys.infeasibility(&out.point).unwrap().norm_part;
        assert!(after <= 1e-10 * before, "{after} vs {before}");
    }

    #[test]
    fn inexact_residual_matches_infeasibility() {
        let a =
            dmatrix![1.0, 2.0, 0.0, -1.0, 0.3; 0.5, -1.0, 3.0, 1.0, 0.0; 2.0, 0.0, 1.0, 1.0, -2.0];
        let sys = ConstraintSystem::new(a, dvector![1.0, -2.0, 0.5]).unwrap();
        let y = dvector![4.0, -3.0, 2.0, 9.0, 1.0];
        let out = sys.project_inexact(&y, 0.5).unwrap();
        let e = sys.infeasibility(&out.point).unwrap().vector_part;
        let rhs = sys.infeasibility(&y).unwrap().norm_part;
        assert!((e + &out.residual).norm() <= 1e-12 * rhs);
    }

    #[test]
    fn null_space_projector() {
        let sys = line();
        let v = dvector![1.0, -1.0];
        assert!((sys.apply_pa(&v).unwrap() - &v).norm() < 1e-15);
        let w = sys.a().tr_mul(&dvector![3.5]);
        assert!(sys.apply_pa(&w).unwrap().norm() < 1e-10);
        let u = dvector![0.2, 5.0];
        let once = sys.apply_pa(&u).unwrap();
        assert!((sys.apply_pa(&once).unwrap() - &once).norm() < 1e-10);
    }

    #[test]
    fn breakdown_is_reported() {
        // a Gram matrix that is singular along (1, -1)
        let g = dmatrix![1.0, 1.0; 1.0, 1.0];
        let err = conjugate_gradient(&g, &dvector![1.0, -1.0], 1e-10, 2).unwrap_err();
        assert!(matches!(
            err,
            ProjectionError::CgBreakdown { iteration: 0, .. }
        ));
    }

    #[test]
    fn cholesky_fallback_meets_a_bound_below_the_cg_floor() {
        let mut rng = crate::sampling::RngStream::new(21);
        let (a, b) = crate::constraintgen::random_constraints_with_rows(40, 30, &mut rng).unwrap();
        let sys = ConstraintSystem::new(a, b).unwrap();
        let y = DVector::from_fn(40, |i, _| (i as f64 * 0.7).sin());
        let rhs_norm = sys.infeasibility(&y).unwrap().norm_part;
        let bound = 1e-13 * rhs_norm;
        let out = sys.project_inexact(&y, bound).unwrap();
        assert!(out.fallback);
        assert!(out.residual_norm <= bound);
        let loose = sys.project_inexact(&y, 1e-2 * rhs_norm).unwrap();
        assert!(loose.residual_norm <= 1e-3 * rhs_norm);
        assert!(loose.fallback || loose.inner_iterations <= 30);
    }
}
