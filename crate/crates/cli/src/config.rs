//! Experiment configuration: a flat JSON object whose keys can be
//! overridden from the command line.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use psgleco::ingest::{ScaleMode, ScaleRange};
use psgleco::{ProjectionMode, StepConfig, Strategy};
use serde::Deserialize;

/// A scalar or a list of scalars; lists drive sweeps.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany {
    One(f64),
    Many(Vec<f64>),
}

impl OneOrMany {
    pub fn values(&self) -> Vec<f64> {
        match self {
            OneOrMany::One(v) => vec![*v],
            OneOrMany::Many(v) => v.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// `logistic:<path>`, `synthetic:<N>,<n>`, `hs50`, `quadratic:<n>,<m>`,
    /// or `perturbed:<base>` with base `hs50`, `huestis`, `dtoc1l` or
    /// `quadratic:<n>,<m>`.
    pub problem: String,
    /// LIBSVM file; shorthand for `problem = "logistic:<path>"`.
    pub data: Option<PathBuf>,
    /// `raw:mapped` pairs, e.g. `"1:1,2:-1"`.
    pub label_map: Option<String>,
    pub keep_labels: Option<Vec<f64>>,
    /// `none`, `unit` or `symmetric`.
    pub scale: String,
    /// `column` or `global`.
    pub scale_mode: String,
    pub n_features: Option<usize>,
    pub constraint_fraction: f64,
    pub constraint_seed: u64,
    pub data_seed: u64,
    pub n_components: usize,
    pub sigma: f64,
    pub noise_seed: u64,

    pub batch_size: usize,
    pub strategy: String,
    pub alpha: OneOrMany,
    pub gamma0: OneOrMany,
    pub gamma1: f64,
    pub a: f64,
    pub delta_lo: f64,
    pub delta_hi: f64,
    pub bb_every: usize,
    /// `same_batch` or `cross_batch`.
    pub bb_pairing: String,
    pub k_max: usize,

    /// `exact` or `inexact`.
    pub projection: String,
    pub eta: f64,
    pub mu0: f64,
    pub rho: f64,
    /// `default`, `projected_origin`, `zero` or `problem`.
    pub x0: String,
    pub metric_every: usize,
    pub log_f: bool,
    pub reshuffle_every: usize,

    /// Number of runs; seeds are `base_seed + 0 .. base_seed + seeds - 1`.
    pub seeds: usize,
    pub base_seed: u64,
    pub jobs: usize,
    pub out_dir: Option<PathBuf>,
    pub svg: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            problem: String::new(),
            data: None,
            label_map: None,
            keep_labels: None,
            scale: "none".into(),
            scale_mode: "column".into(),
            n_features: None,
            constraint_fraction: 0.5,
            constraint_seed: 0,
            data_seed: 0,
            n_components: 10_000,
            sigma: 0.1,
            noise_seed: 0,
            batch_size: 256,
            strategy: "S2".into(),
            alpha: OneOrMany::One(0.1),
            gamma0: OneOrMany::One(0.1),
            gamma1: 1e-5,
            a: 1000.0,
            delta_lo: 1e-3,
            delta_hi: 1e2,
            bb_every: 20,
            bb_pairing: "same_batch".into(),
            k_max: 10_000,
            projection: "exact".into(),
            eta: 0.5,
            mu0: 0.1,
            rho: 0.95,
            x0: "default".into(),
            metric_every: 1,
            log_f: true,
            reshuffle_every: 0,
            seeds: 10,
            base_seed: 0,
            jobs: 1,
            out_dir: None,
            svg: true,
        }
    }
}

impl ExperimentConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        Self::from_json(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn strategy(&self) -> Result<Strategy> {
        Ok(self.strategy.parse()?)
    }

    pub fn projection_mode(&self) -> Result<ProjectionMode> {
        match self.projection.to_ascii_lowercase().as_str() {
            "exact" => Ok(ProjectionMode::Exact),
            "inexact" => Ok(ProjectionMode::Inexact),
            other => bail!("unknown projection mode {other:?}"),
        }
    }

    pub fn scale_range(&self) -> Result<Option<ScaleRange>> {
        match self.scale.as_str() {
            "none" => Ok(None),
            "unit" => Ok(Some(ScaleRange::Unit)),
            "symmetric" => Ok(Some(ScaleRange::Symmetric)),
            other => bail!("unknown scale {other:?}"),
        }
    }

    pub fn scale_mode(&self) -> Result<ScaleMode> {
        match self.scale_mode.as_str() {
            "column" => Ok(ScaleMode::Column),
            "global" => Ok(ScaleMode::Global),
            other => bail!("unknown scale_mode {other:?}"),
        }
    }

    /// The problem string after folding in `data`.
    pub fn problem_spec(&self) -> Result<String> {
        match (&self.data, self.problem.is_empty()) {
            (Some(path), true) => Ok(format!("logistic:{}", path.display())),
            (Some(_), false) => bail!("set either `problem` or `data`, not both"),
            (None, true) => bail!("no problem configured"),
            (None, false) => Ok(self.problem.clone()),
        }
    }

    /// Name of the parameter swept for this strategy.
    pub fn swept_parameter(&self) -> Result<&'static str> {
        Ok(match self.strategy()? {
            Strategy::S1 => "alpha",
            Strategy::S2 | Strategy::S3 => "gamma0",
        })
    }

    /// The sweep values for this strategy's scale parameter.
    pub fn sweep_values(&self) -> Result<Vec<f64>> {
        Ok(match self.strategy()? {
            Strategy::S1 => self.alpha.values(),
            Strategy::S2 | Strategy::S3 => self.gamma0.values(),
        })
    }

    /// Copy with the swept parameter pinned to `value`.
    pub fn with_scale(&self, value: f64) -> Result<Self> {
        let mut cfg = self.clone();
        match cfg.strategy()? {
            Strategy::S1 => cfg.alpha = OneOrMany::One(value),
            Strategy::S2 | Strategy::S3 => cfg.gamma0 = OneOrMany::One(value),
        }
        Ok(cfg)
    }

    pub fn step_config(&self) -> Result<StepConfig> {
        let single = |v: &OneOrMany, name: &str| -> Result<f64> {
            match v.values().as_slice() {
                [x] => Ok(*x),
                _ => bail!("`{name}` has several values; use `psgleco sweep`"),
            }
        };
        let strategy = self.strategy()?;
        let cfg = StepConfig {
            strategy,
            delta_lo: self.delta_lo,
            delta_hi: self.delta_hi,
            alpha_const: if strategy == Strategy::S1 {
                single(&self.alpha, "alpha")?
            } else {
                self.alpha.values().first().copied().unwrap_or(0.1)
            },
            a: self.a,
            gamma0: if strategy == Strategy::S1 {
                self.gamma0.values().first().copied().unwrap_or(0.1)
            } else {
                single(&self.gamma0, "gamma0")?
            },
            gamma1: self.gamma1,
            k_max: self.k_max,
            bb_update_every: self.bb_every,
            bb_pairing: self.bb_pairing.parse()?,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn seed_list(&self) -> Result<Vec<u64>> {
        if self.seeds == 0 {
            bail!("need at least one seed");
        }
        Ok((0..self.seeds as u64).map(|i| self.base_seed + i).collect())
    }
}
