//! The projected stochastic gradient loop and multi-seed experiments.
//!
//! One iteration, starting from `x_k` with step length `Δ_k`:
//!
//! 1. draw a block `i` uniformly and form `g_k = g^{(i)}(x_k)`;
//! 2. `y_k = x_k - Δ_k g_k`;
//! 3. `x_{k+1}` = exact projection of `y_k`, or an inexact one whose Gram
//!    residual is at most `η e(x_k) + μ_k` with `μ_k = μ₀ ρ^k`;
//! 4. `Δ_{k+1}` from the step-length strategy, using only data available at
//!    `x_{k+1}`.
//!
//! Diagnostics use the exact projection and the full gradient:
//! `d(x) = π_S(x - ∇f(x)) - x` and `e(x) = ‖Ax - b‖`.

use std::time::{Duration, Instant};

use nalgebra::DVector;
use rayon::prelude::*;
use thiserror::Error;

use crate::objectives::{FiniteSumObjective, ObjectiveError};
use crate::projection::{ConstraintSystem, ProjectionError, ProjectionOutcome};
use crate::sampling::{Partition, RngStream, SamplingError};
use crate::steplength::{BbPairing, StepConfig, StepConfigError, StepState};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("invalid solver configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Step(#[from] StepConfigError),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("projection failed: {0}")]
    Projection(#[from] ProjectionError),
    #[error("objective failed: {0}")]
    Objective(#[from] ObjectiveError),
    #[error("sampling failed: {0}")]
    Sampling(#[from] SamplingError),
    #[error("non-finite iterate at k = {0}")]
    NonFiniteIterate(usize),
    #[error("step length left its bounds at k = {0}")]
    StepBound(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProjectionMode {
    Exact,
    Inexact,
}

#[derive(Debug, Clone, PartialEq)]
pub enum X0Mode {
    /// `A^T (AA^T)^{-1} b`.
    ProjectedOrigin,
    Zero,
    Given(DVector<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub k_max: usize,
    pub projection_mode: ProjectionMode,
    /// Constant forcing term `η`, in `[0, 1)`.
    pub eta: f64,
    pub mu0: f64,
    pub rho: f64,
    /// Diagnostics are logged when `k % metric_every == 0`.
    pub metric_every: usize,
    pub x0_mode: X0Mode,
    /// Also log `f(x_k)`.
    pub log_value: bool,
    /// Rebuild the partition every this many iterations; 0 keeps it fixed.
    pub reshuffle_every: usize,
}

impl SolverConfig {
    pub fn exact() -> Self {
        Self {
            k_max: 10_000,
            projection_mode: ProjectionMode::Exact,
            eta: 0.0,
            mu0: 0.0,
            rho: 0.95,
            metric_every: 1,
            x0_mode: X0Mode::ProjectedOrigin,
            log_value: false,
            reshuffle_every: 0,
        }
    }

    pub fn inexact() -> Self {
        Self {
            projection_mode: ProjectionMode::Inexact,
            eta: 0.5,
            mu0: 0.1,
            x0_mode: X0Mode::Zero,
            ..Self::exact()
        }
    }

    pub fn validate(&self) -> Result<(), SolverError> {
        let fail = |msg: &str| Err(SolverError::Config(msg.to_string()));
        if self.k_max == 0 {
            return fail("k_max must be positive");
        }
        if self.metric_every == 0 {
            return fail("metric_every must be positive");
        }
        if !(0.0..1.0).contains(&self.eta) {
            return fail("eta must lie in [0, 1)");
        }
        if !(self.mu0 >= 0.0 && self.mu0.is_finite()) {
            return fail("mu0 must be nonnegative");
        }
        if !(self.rho > 0.0 && self.rho < 1.0) {
            return fail("rho must lie in (0, 1)");
        }
        Ok(())
    }

    /// `μ_k = μ₀ ρ^k`.
    pub fn mu(&self, k: usize) -> f64 {
        self.mu0 * self.rho.powf(k as f64)
    }
}

/// Diagnostics at `x_k` and data of the projection that produced `x_{k+1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRow {
    pub k: usize,
    pub value: Option<f64>,
    pub d_norm: f64,
    pub e: f64,
    /// `Δ_k`.
    pub step_len: f64,
    /// `α_k`.
    pub alpha: f64,
    /// `δ` in effect for `Δ_k` (before clamping).
    pub delta: f64,
    pub cg_iters: usize,
    pub skipped: bool,
    /// `‖r(y_k)‖`.
    pub residual_norm: f64,
    /// `η e(x_k) + μ_k`; zero in exact mode.
    pub residual_bound: f64,
    /// `‖ẽ(x_{k+1}) + r(y_k)‖` relative to the operand scale
    /// `max{‖Ay_k - b‖, ‖A‖_F ‖x_{k+1}‖ + ‖b‖}`.
    pub identity_gap: f64,
    /// The same gap relative to `‖Ay_k - b‖` alone; dominated by rounding
    /// once `‖Ay_k - b‖` nears machine precision times the operand scale.
    pub identity_gap_rhs: f64,
    pub cg_fallback: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunFailure {
    pub k: usize,
    pub error: SolverError,
}

#[derive(Debug, Clone)]
pub struct RunRecord {
    pub seed: u64,
    pub rows: Vec<IterationRow>,
    pub final_x: DVector<f64>,
    /// `‖d‖` and `e` at the last iterate reached.
    pub final_d_norm: f64,
    pub final_e: f64,
    pub wall_time: Duration,
    pub failure: Option<RunFailure>,
    /// Non-finite BB scalars replaced by `δ_ℓ`.
    pub safeguard_events: usize,
    /// Largest gap in `ẽ(x_{k+1}) = -r(y_k)` over all iterations, scaled as
    /// [`IterationRow::identity_gap`].
    pub max_identity_gap: f64,
    /// Largest gap relative to `‖Ay_k - b‖` alone.
    pub max_identity_gap_rhs: f64,
    /// Inexact projections that fell back to the Cholesky solve.
    pub cg_fallbacks: usize,
    /// Iterations where `‖r(y_k)‖` exceeded `η e(x_k) + μ_k + 1e-12`.
    pub residual_bound_violations: usize,
}

impl RunRecord {
    pub fn completed(&self) -> bool {
        self.failure.is_none()
    }

    pub fn min_d_norm(&self) -> f64 {
        self.rows
            .iter()
            .map(|r| r.d_norm)
            .chain(std::iter::once(self.final_d_norm))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn min_e(&self) -> f64 {
        self.rows
            .iter()
            .map(|r| r.e)
            .chain(std::iter::once(self.final_e))
            .fold(f64::INFINITY, f64::min)
    }
}

/// `d(x) = π_S(x - ∇f(x)) - x` with the exact projection, and its norm.
pub fn optimality_measure<O: FiniteSumObjective + ?Sized>(
    sys: &ConstraintSystem,
    obj: &O,
    x: &DVector<f64>,
) -> Result<(DVector<f64>, f64), SolverError> {
    let grad = obj.full_gradient(x);
    if grad.iter().any(|v| !v.is_finite()) {
        return Err(ObjectiveError::NonFiniteGradient.into());
    }
    let d = sys.project_exact(&(x - grad))?.point - x;
    let norm = d.norm();
    Ok((d, norm))
}

fn check_dims<O: FiniteSumObjective + ?Sized>(
    sys: &ConstraintSystem,
    obj: &O,
    partition: &Partition,
) -> Result<(), SolverError> {
    if obj.dim() != sys.cols() {
        return Err(SolverError::DimensionMismatch(format!(
            "objective dimension {} vs constraint columns {}",
            obj.dim(),
            sys.cols()
        )));
    }
    if partition.n_components() != obj.num_components() {
        return Err(SolverError::DimensionMismatch(format!(
            "partition covers {} components, objective has {}",
            partition.n_components(),
            obj.num_components()
        )));
    }
    Ok(())
}

fn initial_point(sys: &ConstraintSystem, mode: &X0Mode) -> Result<DVector<f64>, SolverError> {
    match mode {
        X0Mode::ProjectedOrigin => Ok(sys.projected_origin()),
        X0Mode::Zero => Ok(DVector::zeros(sys.cols())),
        X0Mode::Given(x) if x.len() == sys.cols() => Ok(x.clone()),
        X0Mode::Given(x) => Err(SolverError::DimensionMismatch(format!(
            "x0 has length {}, expected {}",
            x.len(),
            sys.cols()
        ))),
    }
}

/// Runs `k_max` iterations. Configuration and dimension errors are returned
/// as `Err`; failures during the iteration end the run early and are stored
/// in [`RunRecord::failure`] alongside the rows logged so far.
pub fn run<O: FiniteSumObjective + ?Sized>(
    sys: &ConstraintSystem,
    obj: &O,
    mut partition: Partition,
    step_cfg: &StepConfig,
    cfg: &SolverConfig,
    rng: &mut RngStream,
) -> Result<RunRecord, SolverError> {
    step_cfg.validate()?;
    cfg.validate()?;
    check_dims(sys, obj, &partition)?;
    let started = Instant::now();
    let batch_size = partition.blocks()[0].len();

    let mut x = initial_point(sys, &cfg.x0_mode)?;
    let mut e_x = sys.infeasibility(&x)?.norm_part;
    let mut step = StepState::initial(step_cfg);
    let mut prev: Option<(DVector<f64>, DVector<f64>)> = None;
    let mut rows = Vec::with_capacity(cfg.k_max / cfg.metric_every + 1);
    let mut max_identity_gap = 0.0_f64;
    let mut max_identity_gap_rhs = 0.0_f64;
    let mut cg_fallbacks = 0;
    let mut residual_bound_violations = 0;
    let mut failure = None;

    for k in 0..cfg.k_max {
        match iterate(sys, obj, &partition, step_cfg, cfg, rng, &step, k, &x, e_x) {
            Ok(it) => {
                if let Some(row) = it.row {
                    rows.push(row);
                }
                max_identity_gap = max_identity_gap.max(it.identity_gap);
                max_identity_gap_rhs = max_identity_gap_rhs.max(it.identity_gap_rhs);
                cg_fallbacks += usize::from(it.cg_fallback);
                if it.residual_norm > it.residual_bound + 1e-12
                    && cfg.projection_mode == ProjectionMode::Inexact
                {
                    residual_bound_violations += 1;
                }
                let (x_old, mut g_old) = prev.take().unwrap_or_else(|| (x.clone(), it.g.clone()));
                if step_cfg.bb_update_due(k) && step_cfg.bb_pairing == BbPairing::SameBatch {
                    match partition.stochastic_gradient(obj, &x_old, it.block) {
                        Ok(g) => g_old = g,
                        Err(error) => {
                            failure = Some(RunFailure {
                                k,
                                error: error.into(),
                            });
                            break;
                        }
                    }
                }
                step.next_step(step_cfg, &x, &x_old, &it.g, &g_old);
                if !step.within_bounds(step_cfg) {
                    failure = Some(RunFailure {
                        k,
                        error: SolverError::StepBound(k + 1),
                    });
                    break;
                }
                prev = Some((std::mem::replace(&mut x, it.x_next), it.g));
                e_x = it.e_next;
            }
            Err(error) => {
                failure = Some(RunFailure { k, error });
                break;
            }
        }
        if cfg.reshuffle_every > 0 && (k + 1) % cfg.reshuffle_every == 0 {
            partition = Partition::build(obj.num_components(), batch_size, rng)?;
        }
    }

    let (final_d_norm, final_e) = if failure.is_none() {
        match optimality_measure(sys, obj, &x) {
            Ok((_, d)) => (d, e_x),
            Err(error) => {
                failure = Some(RunFailure {
                    k: cfg.k_max,
                    error,
                });
                (f64::NAN, e_x)
            }
        }
    } else {
        (f64::NAN, f64::NAN)
    };

    Ok(RunRecord {
        seed: rng.seed(),
        rows,
        final_x: x,
        final_d_norm,
        final_e,
        wall_time: started.elapsed(),
        failure,
        safeguard_events: step.safeguard_events(),
        max_identity_gap,
        max_identity_gap_rhs,
        cg_fallbacks,
        residual_bound_violations,
    })
}

struct Iteration {
    row: Option<IterationRow>,
    block: usize,
    g: DVector<f64>,
    x_next: DVector<f64>,
    e_next: f64,
    residual_norm: f64,
    residual_bound: f64,
    identity_gap: f64,
    identity_gap_rhs: f64,
    cg_fallback: bool,
}

#[allow(clippy::too_many_arguments)]
fn iterate<O: FiniteSumObjective + ?Sized>(
    sys: &ConstraintSystem,
    obj: &O,
    partition: &Partition,
    step_cfg: &StepConfig,
    cfg: &SolverConfig,
    rng: &mut RngStream,
    step: &StepState,
    k: usize,
    x: &DVector<f64>,
    e_x: f64,
) -> Result<Iteration, SolverError> {
    debug_assert!(step.within_bounds(step_cfg));
    let log = k.is_multiple_of(cfg.metric_every);
    let (d_norm, value) = if log {
        let value = if cfg.log_value {
            let v = obj.value(x);
            if !v.is_finite() {
                return Err(SolverError::NonFiniteIterate(k));
            }
            Some(v)
        } else {
            None
        };
        (optimality_measure(sys, obj, x)?.1, value)
    } else {
        (f64::NAN, None)
    };

    let block = partition.sample_block(rng);
    let g = partition.stochastic_gradient(obj, x, block)?;
    let y = x - step.step_len() * &g;
    if y.iter().any(|v| !v.is_finite()) {
        return Err(SolverError::NonFiniteIterate(k + 1));
    }
    let (outcome, residual_bound): (ProjectionOutcome, f64) = match cfg.projection_mode {
        ProjectionMode::Exact => (sys.project_exact(&y)?, 0.0),
        ProjectionMode::Inexact => {
            let bound = cfg.eta * e_x + cfg.mu(k);
            (sys.project_inexact(&y, bound)?, bound)
        }
    };
    if outcome.point.iter().any(|v| !v.is_finite()) {
        return Err(SolverError::NonFiniteIterate(k + 1));
    }
    let infeas = sys.infeasibility(&outcome.point)?;
    let rhs_norm = sys.infeasibility(&y)?.norm_part;
    let (identity_gap, identity_gap_rhs) = if outcome.skipped {
        (0.0, 0.0)
    } else {
        let gap = (&infeas.vector_part + &outcome.residual).norm();
        let scale = sys.a().norm() * outcome.point.norm() + sys.b().norm();
        (
            gap / rhs_norm.max(scale).max(f64::MIN_POSITIVE),
            gap / rhs_norm.max(f64::MIN_POSITIVE),
        )
    };

    let row = log.then(|| IterationRow {
        k,
        value,
        d_norm,
        e: e_x,
        step_len: step.step_len(),
        alpha: step.alpha(),
        delta: step.delta(),
        cg_iters: outcome.inner_iterations,
        skipped: outcome.skipped,
        residual_norm: outcome.residual_norm,
        residual_bound,
        identity_gap,
        identity_gap_rhs,
        cg_fallback: outcome.fallback,
    });
    Ok(Iteration {
        row,
        block,
        g,
        x_next: outcome.point,
        e_next: infeas.norm_part,
        residual_norm: outcome.residual_norm,
        residual_bound,
        identity_gap,
        identity_gap_rhs,
        cg_fallback: outcome.fallback,
    })
}

/// Per-iteration statistics over the completed runs of an experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregateRow {
    pub k: usize,
    pub d_norm_mean: f64,
    pub d_norm_min: f64,
    pub d_norm_max: f64,
    pub e_mean: f64,
    pub e_min: f64,
    pub e_max: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunMinima {
    pub seed: u64,
    pub min_d_norm: f64,
    pub min_e: f64,
}

#[derive(Debug, Clone)]
pub struct AggregateRecord {
    pub rows: Vec<AggregateRow>,
    /// Completed runs, ordered by seed.
    pub runs: Vec<RunRecord>,
    pub minima: Vec<RunMinima>,
    /// Seeds whose run failed, with the reason.
    pub excluded: Vec<(u64, String)>,
}

impl AggregateRecord {
    /// Aggregates runs in seed order so the result does not depend on the
    /// order the runs were supplied or finished in.
    pub fn from_runs(mut runs: Vec<RunRecord>) -> Self {
        runs.sort_by_key(|r| r.seed);
        let (completed, failed): (Vec<_>, Vec<_>) =
            runs.into_iter().partition(RunRecord::completed);
        let excluded = failed
            .into_iter()
            .map(|r| {
                let f = r.failure.expect("failed run carries its failure");
                (r.seed, format!("k = {}: {}", f.k, f.error))
            })
            .collect();
        let n_rows = completed.iter().map(|r| r.rows.len()).min().unwrap_or(0);
        let rows = (0..n_rows)
            .map(|i| {
                let count = completed.len() as f64;
                let mut row = AggregateRow {
                    k: completed[0].rows[i].k,
                    d_norm_mean: 0.0,
                    d_norm_min: f64::INFINITY,
                    d_norm_max: f64::NEG_INFINITY,
                    e_mean: 0.0,
                    e_min: f64::INFINITY,
                    e_max: f64::NEG_INFINITY,
                };
                for run in &completed {
                    let r = &run.rows[i];
                    row.d_norm_mean += r.d_norm;
                    row.d_norm_min = row.d_norm_min.min(r.d_norm);
                    row.d_norm_max = row.d_norm_max.max(r.d_norm);
                    row.e_mean += r.e;
                    row.e_min = row.e_min.min(r.e);
                    row.e_max = row.e_max.max(r.e);
                }
                row.d_norm_mean /= count;
                row.e_mean /= count;
                row
            })
            .collect();
        let minima = completed
            .iter()
            .map(|r| RunMinima {
                seed: r.seed,
                min_d_norm: r.min_d_norm(),
                min_e: r.min_e(),
            })
            .collect();
        Self {
            rows,
            runs: completed,
            minima,
            excluded,
        }
    }

    /// Smallest mean `‖d‖` over the logged iterations.
    pub fn min_mean_d_norm(&self) -> f64 {
        self.rows
            .iter()
            .map(|r| r.d_norm_mean)
            .fold(f64::INFINITY, f64::min)
    }
}

/// One run per seed, each with its own partition drawn from that seed, on up
/// to `jobs` threads.
#[allow(clippy::too_many_arguments)]
pub fn run_many<O: FiniteSumObjective + ?Sized>(
    seeds: &[u64],
    sys: &ConstraintSystem,
    obj: &O,
    batch_size: usize,
    step_cfg: &StepConfig,
    cfg: &SolverConfig,
    jobs: usize,
) -> Result<AggregateRecord, SolverError> {
    if seeds.is_empty() {
        return Err(SolverError::Config("at least one seed is required".into()));
    }
    step_cfg.validate()?;
    cfg.validate()?;
    let one = |seed: u64| -> Result<RunRecord, SolverError> {
        let mut rng = RngStream::new(seed);
        let partition = Partition::build(obj.num_components(), batch_size, &mut rng)?;
        run(sys, obj, partition, step_cfg, cfg, &mut rng)
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| SolverError::Config(e.to_string()))?;
    let runs: Result<Vec<RunRecord>, SolverError> =
        pool.install(|| seeds.par_iter().map(|&s| one(s)).collect());
    Ok(AggregateRecord::from_runs(runs?))
}
