use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use psgleco::{run_many, AggregateRecord, ProjectionMode, SolverConfig, X0Mode};

use crate::config::ExperimentConfig;
use crate::output;
use crate::problem;

pub struct ExperimentReport {
    pub aggregate: AggregateRecord,
}

impl ExperimentReport {
    pub fn all_completed(&self) -> bool {
        self.aggregate.excluded.is_empty()
    }
}

fn solver_config(
    cfg: &ExperimentConfig,
    given_x0: Option<nalgebra::DVector<f64>>,
) -> Result<SolverConfig> {
    let mode = cfg.projection_mode()?;
    let base = match mode {
        ProjectionMode::Exact => SolverConfig::exact(),
        ProjectionMode::Inexact => SolverConfig::inexact(),
    };
    let x0_mode = match cfg.x0.as_str() {
        "default" => match given_x0 {
            Some(x0) => X0Mode::Given(x0),
            None => base.x0_mode.clone(),
        },
        "projected_origin" => X0Mode::ProjectedOrigin,
        "zero" => X0Mode::Zero,
        "problem" => X0Mode::Given(given_x0.context("problem has no start point")?),
        other => anyhow::bail!("unknown x0 mode {other:?}"),
    };
    let (eta, mu0) = match mode {
        ProjectionMode::Exact => (0.0, 0.0),
        ProjectionMode::Inexact => (cfg.eta, cfg.mu0),
    };
    let solver = SolverConfig {
        k_max: cfg.k_max,
        projection_mode: mode,
        eta,
        mu0,
        rho: cfg.rho,
        metric_every: cfg.metric_every,
        x0_mode,
        log_value: cfg.log_f,
        reshuffle_every: cfg.reshuffle_every,
    };
    solver.validate()?;
    Ok(solver)
}

/// Runs every seed and writes `run_<seed>.csv`, `aggregate.csv`,
/// `summary.txt` and optionally `curves.svg` into `out_dir`.
pub fn run_experiment(cfg: &ExperimentConfig, out_dir: &Path) -> Result<ExperimentReport> {
    let step = cfg.step_config()?;
    let seeds = cfg.seed_list()?;
    let built = problem::build(cfg)?;
    let solver = solver_config(cfg, built.x0.clone())?;
    let batch = cfg.batch_size.min(built.objective.num_components());

    let aggregate = run_many(
        &seeds,
        &built.system,
        &built.objective,
        batch,
        &step,
        &solver,
        cfg.jobs,
    )?;

    fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    let write = |name: &str, body: String| -> Result<()> {
        let path = out_dir.join(name);
        fs::write(&path, body).with_context(|| format!("writing {}", path.display()))
    };
    for run in &aggregate.runs {
        write(&format!("run_{}.csv", run.seed), output::run_csv(run))?;
    }
    write("aggregate.csv", output::aggregate_csv(&aggregate))?;
    write(
        "summary.txt",
        output::summary(&cfg.strategy()?.to_string(), &aggregate),
    )?;
    if cfg.svg {
        let d: Vec<(usize, f64)> = aggregate
            .rows
            .iter()
            .map(|r| (r.k, r.d_norm_mean))
            .collect();
        let mut series = vec![("mean ||d(x_k)||", d)];
        if solver.projection_mode == ProjectionMode::Inexact {
            series.push((
                "mean ||Ax_k - b||",
                aggregate.rows.iter().map(|r| (r.k, r.e_mean)).collect(),
            ));
        }
        let title = format!("{} {}", cfg.problem_spec()?, cfg.strategy()?);
        write("curves.svg", output::curves_svg(&title, &series))?;
    }
    Ok(ExperimentReport { aggregate })
}

#[derive(Debug, Clone, PartialEq)]
pub enum SweepStatus {
    Ok,
    /// Some runs aborted (typically a non-finite iterate).
    Diverged,
    Error(String),
}

#[derive(Debug, Clone)]
pub struct SweepEntry {
    pub value: f64,
    pub min_mean_d_norm: f64,
    pub status: SweepStatus,
}

/// Ranked sweep results: completed values by smallest mean `‖d‖`, then
/// flagged ones in input order.
pub struct SweepReport {
    pub parameter: &'static str,
    pub entries: Vec<SweepEntry>,
}

impl SweepReport {
    pub fn all_completed(&self) -> bool {
        self.entries.iter().all(|e| e.status == SweepStatus::Ok)
    }

    pub fn csv(&self) -> String {
        let mut out = String::from("rank,parameter,value,min_mean_d_norm,status\n");
        for (i, e) in self.entries.iter().enumerate() {
            let status = match &e.status {
                SweepStatus::Ok => "ok".to_string(),
                SweepStatus::Diverged => "diverged".to_string(),
                SweepStatus::Error(msg) => format!("error: {}", msg.replace([',', '\n'], ";")),
            };
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                i + 1,
                self.parameter,
                e.value,
                output::num(e.min_mean_d_norm),
                status
            ));
        }
        out
    }
}

/// One experiment per value of the swept parameter, each in
/// `<out_dir>/<parameter>_<value>`, plus `sweep_summary.csv`.
pub fn sweep(cfg: &ExperimentConfig, out_dir: &Path) -> Result<SweepReport> {
    let parameter = cfg.swept_parameter()?;
    let values = cfg.sweep_values()?;
    anyhow::ensure!(!values.is_empty(), "sweep list for `{parameter}` is empty");
    let mut entries = Vec::with_capacity(values.len());
    for value in values {
        let dir = out_dir.join(format!("{parameter}_{value}"));
        let entry = match cfg.with_scale(value).and_then(|c| run_experiment(&c, &dir)) {
            Ok(report) => SweepEntry {
                value,
                min_mean_d_norm: report.aggregate.min_mean_d_norm(),
                status: if report.all_completed() {
                    SweepStatus::Ok
                } else {
                    SweepStatus::Diverged
                },
            },
            Err(e) => SweepEntry {
                value,
                min_mean_d_norm: f64::NAN,
                status: SweepStatus::Error(format!("{e:#}")),
            },
        };
        entries.push(entry);
    }
    // stable sort keeps input order among flagged entries
    entries.sort_by(|a, b| {
        let key = |e: &SweepEntry| (e.status != SweepStatus::Ok, e.min_mean_d_norm.is_nan());
        key(a).cmp(&key(b)).then_with(|| {
            match (a.status == SweepStatus::Ok, b.status == SweepStatus::Ok) {
                (true, true) => a.min_mean_d_norm.total_cmp(&b.min_mean_d_norm),
                _ => std::cmp::Ordering::Equal,
            }
        })
    });
    let report = SweepReport { parameter, entries };
    fs::create_dir_all(out_dir)?;
    fs::write(out_dir.join("sweep_summary.csv"), report.csv())?;
    Ok(report)
}
