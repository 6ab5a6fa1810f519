//! Turns a problem string into constraints, objective and start point.

use std::fs::File;
use std::io::BufReader;

use anyhow::{bail, Context, Result};
use nalgebra::DVector;
use psgleco::constraintgen::random_constraints;
use psgleco::ingest::{parse_label_map, parse_libsvm};
use psgleco::objectives::{
    hs50, quadratic_oracle, LogisticProblem, PerturbedProblem, QuadraticFunction, SingleComponent,
    SmoothFunction,
};
use psgleco::{ConstraintSystem, FiniteSumObjective, RngStream};

use crate::config::ExperimentConfig;

pub struct BuiltProblem {
    pub system: ConstraintSystem,
    pub objective: Box<dyn FiniteSumObjective>,
    /// Start point supplied with the problem, if any.
    pub x0: Option<DVector<f64>>,
}

fn parse_pair(text: &str) -> Result<(usize, usize)> {
    let (a, b) = text
        .split_once(',')
        .with_context(|| format!("expected two comma-separated integers, found {text:?}"))?;
    Ok((a.trim().parse()?, b.trim().parse()?))
}

fn random_system(n: usize, cfg: &ExperimentConfig) -> Result<ConstraintSystem> {
    let mut rng = RngStream::new(cfg.constraint_seed);
    let (a, b) = random_constraints(n, cfg.constraint_fraction, &mut rng)?;
    Ok(ConstraintSystem::new(a, b)?)
}

/// Quadratic base with random constraints, all drawn from `seed`; the
/// stand-in for test problems whose formulas are not bundled.
fn quadratic_base(
    n: usize,
    m: usize,
    seed: u64,
) -> Result<(Box<dyn SmoothFunction>, ConstraintSystem)> {
    let oracle = quadratic_oracle(n, m, 1, seed)?;
    let base: QuadraticFunction = oracle.problem.base().clone();
    Ok((Box::new(base), oracle.system))
}

fn logistic(path: &str, cfg: &ExperimentConfig) -> Result<BuiltProblem> {
    let file = File::open(path).with_context(|| format!("opening dataset {path}"))?;
    let mut data = parse_libsvm(BufReader::new(file)).with_context(|| format!("parsing {path}"))?;
    if let Some(keep) = &cfg.keep_labels {
        data = data.filter_classes(keep)?;
    }
    if let Some(map) = &cfg.label_map {
        let pairs = parse_label_map(map).with_context(|| format!("bad label_map {map:?}"))?;
        data = data.remap_labels(&pairs)?;
    }
    if let Some(n) = cfg.n_features {
        data = data.with_dim(n)?;
    }
    if let Some(range) = cfg.scale_range()? {
        data = data.scale_features(range, cfg.scale_mode()?);
    }
    let system = random_system(data.dim(), cfg)?;
    Ok(BuiltProblem {
        system,
        objective: Box::new(data.into_logistic()?),
        x0: None,
    })
}

pub fn build(cfg: &ExperimentConfig) -> Result<BuiltProblem> {
    let spec = cfg.problem_spec()?;
    let (kind, rest) = spec.split_once(':').unwrap_or((spec.as_str(), ""));
    match kind {
        "logistic" => logistic(rest, cfg),
        "synthetic" => {
            let (n_samples, n) = parse_pair(rest)?;
            let mut rng = RngStream::new(cfg.data_seed);
            let obj = LogisticProblem::synthetic_separable(n_samples, n, rng.rng());
            Ok(BuiltProblem {
                system: random_system(n, cfg)?,
                objective: Box::new(obj),
                x0: None,
            })
        }
        "hs50" => {
            let (f, a, b, x0) = hs50();
            Ok(BuiltProblem {
                system: ConstraintSystem::new(a, b)?,
                objective: Box::new(SingleComponent(Box::new(f))),
                x0: Some(x0),
            })
        }
        "quadratic" => {
            let (n, m) = parse_pair(rest)?;
            let oracle = quadratic_oracle(n, m, cfg.n_components, cfg.data_seed)?;
            Ok(BuiltProblem {
                system: oracle.system,
                objective: Box::new(oracle.problem),
                x0: None,
            })
        }
        "perturbed" => {
            let (base, system, x0): (Box<dyn SmoothFunction>, _, _) = match rest.split_once(':') {
                _ if rest == "hs50" => {
                    let (f, a, b, x0) = hs50();
                    (Box::new(f), ConstraintSystem::new(a, b)?, Some(x0))
                }
                _ if rest == "huestis" => {
                    let (f, s) = quadratic_base(10, 2, cfg.data_seed)?;
                    (f, s, None)
                }
                _ if rest == "dtoc1l" => {
                    let (f, s) = quadratic_base(58, 36, cfg.data_seed)?;
                    (f, s, None)
                }
                Some(("quadratic", dims)) => {
                    let (n, m) = parse_pair(dims)?;
                    let (f, s) = quadratic_base(n, m, cfg.data_seed)?;
                    (f, s, None)
                }
                _ => bail!("unknown perturbed base {rest:?}"),
            };
            let obj = PerturbedProblem::new(base, cfg.n_components, cfg.sigma, cfg.noise_seed);
            Ok(BuiltProblem {
                system,
                objective: Box::new(obj),
                x0,
            })
        }
        _ => bail!("unknown problem {spec:?}"),
    }
}
