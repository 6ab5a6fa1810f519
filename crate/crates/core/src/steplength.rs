//! Step-length strategies.
//!
//! Every strategy produces `Δ_{k+1} = α_{k+1} · clamp(δ_k)` where the clamp
//! keeps `δ_k` inside `[δ_ℓ, δ_u]`:
//!
//! | strategy | `α_{k+1}`                         | `δ_k`                          |
//! |----------|-----------------------------------|--------------------------------|
//! | S1       | constant `α`                      | retarded Barzilai–Borwein      |
//! | S2       | `a/(a+k) · c_k(γ₀, γ₁)`           | retarded Barzilai–Borwein      |
//! | S3       | `a/(a+k) · c_k(γ₀, γ₁)`           | `1`                            |
//!
//! with the cosine decay `c_k = γ₁ + ½(γ₀ − γ₁)(1 + cos(kπ/k_max))`.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use nalgebra::DVector;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Strategy {
    S1,
    S2,
    S3,
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Strategy::S1 => "S1",
            Strategy::S2 => "S2",
            Strategy::S3 => "S3",
        })
    }
}

impl FromStr for Strategy {
    type Err = StepConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "S1" => Ok(Strategy::S1),
            "S2" => Ok(Strategy::S2),
            "S3" => Ok(Strategy::S3),
            _ => Err(StepConfigError::UnknownStrategy(s.to_string())),
        }
    }
}

/// Which stochastic gradients form the BB difference `z_{k-1}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BbPairing {
    /// `g_B(x_k) - g_B(x_{k-1})` with the block `B` drawn at `k`; costs one
    /// extra block gradient per BB refresh.
    SameBatch,
    /// `g_k - g_{k-1}` as drawn, from different blocks.
    CrossBatch,
}

impl fmt::Display for BbPairing {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BbPairing::SameBatch => "same_batch",
            BbPairing::CrossBatch => "cross_batch",
        })
    }
}

impl FromStr for BbPairing {
    type Err = StepConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "same_batch" => Ok(BbPairing::SameBatch),
            "cross_batch" => Ok(BbPairing::CrossBatch),
            _ => Err(StepConfigError::Invalid(format!(
                "unknown BB pairing {s:?}"
            ))),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StepConfigError {
    #[error("unknown strategy {0:?}")]
    UnknownStrategy(String),
    #[error("invalid step configuration: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepConfig {
    pub strategy: Strategy,
    pub delta_lo: f64,
    pub delta_hi: f64,
    /// `α` for S1.
    pub alpha_const: f64,
    pub a: f64,
    pub gamma0: f64,
    pub gamma1: f64,
    pub k_max: usize,
    /// BB refresh cadence for S1/S2.
    pub bb_update_every: usize,
    pub bb_pairing: BbPairing,
}

impl Default for StepConfig {
    fn default() -> Self {
        Self {
            strategy: Strategy::S2,
            delta_lo: 1e-3,
            delta_hi: 1e2,
            alpha_const: 1e-1,
            a: 1000.0,
            gamma0: 1e-1,
            gamma1: 1e-5,
            k_max: 10_000,
            bb_update_every: 20,
            bb_pairing: BbPairing::SameBatch,
        }
    }
}

impl StepConfig {
    pub fn validate(&self) -> Result<(), StepConfigError> {
        let fail = |msg: &str| Err(StepConfigError::Invalid(msg.to_string()));
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !(positive(self.delta_lo) && positive(self.delta_hi) && self.delta_lo < self.delta_hi) {
            return fail("need 0 < delta_lo < delta_hi < inf");
        }
        if self.k_max == 0 {
            return fail("k_max must be positive");
        }
        if self.bb_update_every == 0 {
            return fail("bb_update_every must be positive");
        }
        match self.strategy {
            Strategy::S1 if !positive(self.alpha_const) => fail("alpha must be positive"),
            Strategy::S2 | Strategy::S3
                if !(positive(self.a) && positive(self.gamma0) && positive(self.gamma1)) =>
            {
                fail("a, gamma0 and gamma1 must be positive")
            }
            Strategy::S2 | Strategy::S3 if self.gamma1 > self.gamma0 => {
                fail("need gamma1 <= gamma0")
            }
            _ => Ok(()),
        }
    }

    /// Whether the step formed at the end of iteration `k` refreshes `δ`.
    pub fn bb_update_due(&self, k: usize) -> bool {
        self.strategy != Strategy::S3 && k >= 1 && k.is_multiple_of(self.bb_update_every)
    }

    /// `max{δ_ℓ, min{δ, δ_u}}`; a non-finite `δ` maps to `δ_ℓ`.
    pub fn clamp_delta(&self, delta: f64) -> f64 {
        if !delta.is_finite() {
            return self.delta_lo;
        }
        self.delta_lo.max(delta.min(self.delta_hi))
    }

    /// `c_k(γ₀, γ₁)`; `k` is capped at `k_max`.
    pub fn cosine_decay(&self, k: usize) -> f64 {
        let k = k.min(self.k_max);
        if k == 0 {
            return self.gamma0;
        }
        if k == self.k_max {
            return self.gamma1;
        }
        let c = (k as f64 * PI / self.k_max as f64).cos();
        self.gamma1 + 0.5 * (self.gamma0 - self.gamma1) * (1.0 + c)
    }

    /// `α_{k+1}`. The initial `α₀` is the `k = 0` value.
    pub fn alpha_schedule(&self, k: usize) -> f64 {
        match self.strategy {
            Strategy::S1 => self.alpha_const,
            Strategy::S2 | Strategy::S3 => self.a / (self.a + k as f64) * self.cosine_decay(k),
        }
    }
}

/// Retarded Barzilai–Borwein scalar `|d^T d / d^T z|`, or `fallback` when
/// the denominator is negligible or the ratio is not finite.
pub fn bb_delta(d: &DVector<f64>, z: &DVector<f64>, fallback: f64) -> f64 {
    let dz = d.dot(z);
    if dz.abs() <= 1e-14 * d.norm() * z.norm() {
        return fallback;
    }
    let delta = (d.norm_squared() / dz).abs();
    if delta.is_finite() && delta > 0.0 {
        delta
    } else {
        fallback
    }
}

/// Step-length state carried between iterations.
#[derive(Debug, Clone)]
pub struct StepState {
    k: usize,
    step_len: f64,
    alpha: f64,
    delta: f64,
    prev_step: Option<DVector<f64>>,
    prev_grad_diff: Option<DVector<f64>>,
    safeguard_events: usize,
}

impl StepState {
    /// State at `k = 0`: `δ = δ_ℓ` (S3: `1`), `Δ₀ = α₀ δ_ℓ`.
    pub fn initial(cfg: &StepConfig) -> Self {
        let alpha = cfg.alpha_schedule(0);
        let delta = match cfg.strategy {
            Strategy::S3 => 1.0,
            _ => cfg.delta_lo,
        };
        Self {
            k: 0,
            step_len: alpha * cfg.delta_lo,
            alpha,
            delta,
            prev_step: None,
            prev_grad_diff: None,
            safeguard_events: 0,
        }
    }

    /// Iteration the current step length belongs to.
    pub fn k(&self) -> usize {
        self.k
    }

    /// `Δ_k`.
    pub fn step_len(&self) -> f64 {
        self.step_len
    }

    /// `α_k`.
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// `δ_{k-1}`, the unclamped scalar behind `Δ_k`.
    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn prev_step(&self) -> Option<&DVector<f64>> {
        self.prev_step.as_ref()
    }

    pub fn prev_grad_diff(&self) -> Option<&DVector<f64>> {
        self.prev_grad_diff.as_ref()
    }

    /// How many times a non-finite `δ` was replaced by `δ_ℓ`.
    pub fn safeguard_events(&self) -> usize {
        self.safeguard_events
    }

    /// `α_k δ_ℓ <= Δ_k <= α_k δ_u`.
    pub fn within_bounds(&self, cfg: &StepConfig) -> bool {
        self.alpha * cfg.delta_lo <= self.step_len && self.step_len <= self.alpha * cfg.delta_hi
    }

    /// Forms `Δ_{k+1}` at the end of iteration `k`.
    ///
    /// `x_new`/`x_old` are `x_k`/`x_{k-1}` and `g_new`/`g_old` stochastic
    /// gradients at those iterates (per [`BbPairing`]), so the BB pair is the
    /// lagged one and nothing drawn after `x_{k+1}` enters the step. The
    /// arguments are read only when [`StepConfig::bb_update_due`] holds.
    pub fn next_step(
        &mut self,
        cfg: &StepConfig,
        x_new: &DVector<f64>,
        x_old: &DVector<f64>,
        g_new: &DVector<f64>,
        g_old: &DVector<f64>,
    ) {
        let k = self.k;
        match cfg.strategy {
            Strategy::S3 => self.delta = 1.0,
            Strategy::S1 | Strategy::S2 => {
                if cfg.bb_update_due(k) {
                    let d = x_new - x_old;
                    let z = g_new - g_old;
                    self.delta = bb_delta(&d, &z, self.delta);
                    self.prev_step = Some(d);
                    self.prev_grad_diff = Some(z);
                }
            }
        }
        if !self.delta.is_finite() {
            self.safeguard_events += 1;
        }
        self.alpha = cfg.alpha_schedule(k);
        self.step_len = self.alpha * cfg.clamp_delta(self.delta);
        self.k = k + 1;
    }
}
