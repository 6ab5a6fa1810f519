use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Result};
use clap::{Args, Parser, Subcommand};
use psgleco_cli::config::OneOrMany;
use psgleco_cli::{run_experiment, sweep, ExperimentConfig, SweepStatus};

#[derive(Parser)]
#[command(
    name = "psgleco",
    version,
    about = "Projected stochastic gradient under linear equality constraints"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one configuration over several seeds.
    Run(Overrides),
    /// Run once per value of the strategy's scale parameter and rank them.
    Sweep(Overrides),
}

#[derive(Args)]
struct Overrides {
    /// JSON configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (falls back to the config, then PSGLECO_OUT).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    problem: Option<String>,
    /// LIBSVM dataset for a logistic problem.
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    strategy: Option<String>,
    /// Comma-separated values allowed for sweeps.
    #[arg(long, value_delimiter = ',')]
    alpha: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    gamma0: Option<Vec<f64>>,
    #[arg(long)]
    seeds: Option<usize>,
    #[arg(long)]
    base_seed: Option<u64>,
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long)]
    k_max: Option<usize>,
    /// `exact` or `inexact`.
    #[arg(long)]
    projection: Option<String>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    no_svg: bool,
}

fn many(v: Vec<f64>) -> OneOrMany {
    match v.as_slice() {
        [x] => OneOrMany::One(*x),
        _ => OneOrMany::Many(v),
    }
}

impl Overrides {
    fn resolve(self) -> Result<(ExperimentConfig, PathBuf)> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::from_file(path)?,
            None => ExperimentConfig::default(),
        };
        if let Some(p) = self.problem {
            cfg.problem = p;
            cfg.data = None;
        }
        if let Some(d) = self.data {
            cfg.data = Some(d);
            cfg.problem.clear();
        }
        if let Some(v) = self.strategy {
            cfg.strategy = v;
        }
        if let Some(v) = self.alpha {
            cfg.alpha = many(v);
        }
        if let Some(v) = self.gamma0 {
            cfg.gamma0 = many(v);
        }
        if let Some(v) = self.seeds {
            cfg.seeds = v;
        }
        if let Some(v) = self.base_seed {
            cfg.base_seed = v;
        }
        if let Some(v) = self.jobs {
            cfg.jobs = v;
        }
        if let Some(v) = self.k_max {
            cfg.k_max = v;
        }
        if let Some(v) = self.projection {
            cfg.projection = v;
        }
        if let Some(v) = self.batch_size {
            cfg.batch_size = v;
        }
        if self.no_svg {
            cfg.svg = false;
        }
        let out = self
            .out
            .or_else(|| cfg.out_dir.clone())
            .or_else(|| std::env::var_os("PSGLECO_OUT").map(PathBuf::from));
        let Some(out) = out else {
            bail!("no output directory: pass --out, set out_dir, or set PSGLECO_OUT");
        };
        Ok((cfg, out))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn execute(command: Command) -> Result<bool> {
    match command {
        Command::Run(o) => {
            let (cfg, out) = o.resolve()?;
            let report = run_experiment(&cfg, &out)?;
            let agg = &report.aggregate;
            println!(
                "{} runs completed, {} failed, min mean ||d|| {:.6e}; output in {}",
                agg.runs.len(),
                agg.excluded.len(),
                agg.min_mean_d_norm(),
                out.display()
            );
            for (seed, reason) in &agg.excluded {
                eprintln!("seed {seed} failed: {reason}");
            }
            Ok(report.all_completed())
        }
        Command::Sweep(o) => {
            let (cfg, out) = o.resolve()?;
            let report = sweep(&cfg, &out)?;
            for e in &report.entries {
                let flag = match &e.status {
                    SweepStatus::Ok => String::new(),
                    SweepStatus::Diverged => " (diverged)".into(),
                    SweepStatus::Error(m) => format!(" (error: {m})"),
                };
                println!(
                    "{} = {}: min mean ||d|| {:.6e}{flag}",
                    report.parameter, e.value, e.min_mean_d_norm
                );
            }
            println!(
                "ranking written to {}",
                out.join("sweep_summary.csv").display()
            );
            Ok(report.all_completed())
        }
    }
}
