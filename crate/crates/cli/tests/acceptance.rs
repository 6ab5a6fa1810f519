//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use psgleco::constraintgen::random_constraints_with_rows;
use psgleco::objectives::{
    hs50, quadratic_oracle, Hs50, LogisticProblem, PerturbedProblem, QuadraticFunction,
    SingleComponent, SmoothFunction,
};
use psgleco::{
    run, ConstraintSystem, FiniteSumObjective, Partition, RngStream, RunRecord, SolverConfig,
    StepConfig, Strategy, X0Mode,
};
use psgleco_cli::{run_experiment, ExperimentConfig};
use rand::Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

/// Every run produced by the suite, with the step bounds it ran under.
#[derive(Default)]
struct RunLog {
    runs: Vec<(String, f64, f64, RunRecord)>,
}

impl RunLog {
    fn push(&mut self, label: &str, step: &StepConfig, run: &RunRecord) {
        self.runs
            .push((label.to_string(), step.delta_lo, step.delta_hi, run.clone()));
    }
}

fn random_vector(rng: &mut RngStream, n: usize, scale: f64) -> DVector<f64> {
    DVector::from_fn(n, |_, _| scale * rng.rng().random_range(-1.0..1.0))
}

fn rel(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    (a - b).norm() / b.norm().max(f64::MIN_POSITIVE)
}

fn sample_objectives() -> Vec<(&'static str, Box<dyn FiniteSumObjective>)> {
    let mut rng = RngStream::new(11);
    let quad = quadratic_oracle(12, 4, 50, 3).unwrap();
    let base_quad = quadratic_oracle(9, 3, 1, 4).unwrap().problem.base().clone();
    vec![
        (
            "logistic",
            Box::new(LogisticProblem::synthetic_separable(200, 15, rng.rng()))
                as Box<dyn FiniteSumObjective>,
        ),
        ("quadratic", Box::new(quad.problem)),
        ("hs50", Box::new(SingleComponent(Box::new(Hs50)))),
        (
            "perturbed_hs50",
            Box::new(PerturbedProblem::new(Box::new(Hs50), 40, 0.1, 5)),
        ),
        (
            "perturbed_quadratic",
            Box::new(PerturbedProblem::new(Box::new(base_quad), 30, 0.1, 6)),
        ),
    ]
}

fn criterion_1() -> Outcome {
    let mut rng = RngStream::new(1);
    let mut worst = 0.0_f64;
    for (_, obj) in sample_objectives() {
        let n_comp = obj.num_components();
        for _ in 0..20 {
            let x = random_vector(&mut rng, obj.dim(), 2.0);
            let batch = rng.rng().random_range(1..=n_comp);
            let part = Partition::build(n_comp, batch, &mut rng).unwrap();
            let r = part.num_blocks();
            let mut avg = DVector::zeros(obj.dim());
            for i in 0..r {
                avg += part.stochastic_gradient(obj.as_ref(), &x, i).unwrap();
            }
            avg /= r as f64;
            worst = worst.max(rel(&avg, &obj.full_gradient(&x)));
        }
    }
    outcome(worst <= 1e-12, format!("max relative error {worst:.2e}"))
}

fn criterion_2() -> Outcome {
    let mut rng = RngStream::new(2);
    let (mut feas, mut idem, mut orth) = (0.0_f64, 0.0_f64, 0.0_f64);
    for _ in 0..100 {
        let n = rng.rng().random_range(2..=50);
        let m = rng.rng().random_range(1..n);
        let (a, _) = random_constraints_with_rows(n, m, &mut rng).unwrap();
        let b = random_vector(&mut rng, m, 5.0);
        let sys = ConstraintSystem::new(a.clone(), b.clone()).unwrap();
        let y = random_vector(&mut rng, n, 10.0);
        let p = sys.project_exact(&y).unwrap().point;
        let scale = 1.0 + b.norm() + y.norm();
        feas = feas.max((&a * &p - &b).norm() / scale);
        let pp = sys.project_exact(&p).unwrap().point;
        idem = idem.max((&pp - &p).norm() / scale);
        orth = orth.max(sys.apply_pa(&(&y - &p)).unwrap().norm() / y.norm());
    }
    let pass = feas <= 1e-9 && idem <= 1e-9 && orth <= 1e-9;
    outcome(
        pass,
        format!(
            "feasibility {feas:.2e}, idempotence {idem:.2e}, orthogonality {orth:.2e} (scaled)"
        ),
    )
}

fn s2_step(k_max: usize) -> StepConfig {
    StepConfig {
        strategy: Strategy::S2,
        gamma0: 0.1,
        k_max,
        ..StepConfig::default()
    }
}

fn inexact_config(k_max: usize) -> SolverConfig {
    SolverConfig {
        k_max,
        x0_mode: X0Mode::Zero,
        log_value: false,
        ..SolverConfig::inexact()
    }
}

/// Inexact logistic run with `n = 50`, `m = 25`.
fn criterion_4(log: &mut RunLog) -> Outcome {
    let mut rng = RngStream::new(4);
    let obj = LogisticProblem::synthetic_separable(1000, 50, rng.rng());
    let (a, b) = random_constraints_with_rows(50, 25, &mut rng).unwrap();
    let sys = ConstraintSystem::new(a, b).unwrap();
    let step = s2_step(5000);
    let cfg = SolverConfig {
        eta: 0.5,
        mu0: 0.1,
        rho: 0.95,
        ..inexact_config(5000)
    };
    let mut seed_rng = RngStream::new(0);
    let part = Partition::build(1000, 100, &mut seed_rng).unwrap();
    let rec = run(&sys, &obj, part, &step, &cfg, &mut seed_rng).unwrap();
    log.push("inexact logistic n=50", &step, &rec);
    if let Some(f) = &rec.failure {
        return outcome(false, format!("run failed at k={}: {}", f.k, f.error));
    }
    let e0 = rec.rows[0].e;
    let envelope = |k: usize| (0.96_f64.powi(k as i32) * (e0 + 1.0)).max(1e-8);
    let mut curve: Vec<(usize, f64)> = rec.rows.iter().map(|r| (r.k, r.e)).collect();
    curve.push((5000, rec.final_e));
    let breaches = curve.iter().filter(|&&(k, e)| e > envelope(k)).count();
    let pass = breaches == 0 && rec.final_e <= 1e-6 && curve.len() == 5001;
    outcome(
        pass,
        format!(
            "{breaches} envelope breaches over {} iterates, e(x_5000) = {:.2e}",
            curve.len(),
            rec.final_e
        ),
    )
}

/// Residual contract and the infeasibility identity over every inexact run.
fn criterion_3(log: &mut RunLog) -> Outcome {
    let step = s2_step(2000);
    let mut extra = Vec::new();
    for seed in 0..3 {
        let o = quadratic_oracle(30, 12, 200, 10 + seed).unwrap();
        let mut rng = RngStream::new(seed);
        let part = Partition::build(200, 16, &mut rng).unwrap();
        extra.push(
            run(
                &o.system,
                &o.problem,
                part,
                &step,
                &inexact_config(2000),
                &mut rng,
            )
            .unwrap(),
        );
    }
    let mut rng = RngStream::new(33);
    let obj = LogisticProblem::synthetic_separable(300, 40, rng.rng());
    let (a, b) = random_constraints_with_rows(40, 30, &mut rng).unwrap();
    let sys = ConstraintSystem::new(a, b).unwrap();
    for seed in 0..3 {
        let mut rng = RngStream::new(seed);
        let part = Partition::build(300, 8, &mut rng).unwrap();
        extra.push(run(&sys, &obj, part, &step, &inexact_config(2000), &mut rng).unwrap());
    }
    for rec in &extra {
        log.push("inexact contract", &step, rec);
    }

    let inexact: Vec<&RunRecord> = log
        .runs
        .iter()
        .filter(|(label, ..)| label.starts_with("inexact"))
        .map(|(.., r)| r)
        .collect();
    let failed = inexact.iter().filter(|r| !r.completed()).count();
    let violations: usize = inexact.iter().map(|r| r.residual_bound_violations).sum();
    let gap = inexact
        .iter()
        .map(|r| r.max_identity_gap)
        .fold(0.0, f64::max);
    let gap_rhs = inexact
        .iter()
        .map(|r| r.max_identity_gap_rhs)
        .fold(0.0, f64::max);
    let fallbacks: usize = inexact.iter().map(|r| r.cg_fallbacks).sum();
    let iterations: usize = inexact.iter().map(|r| r.rows.len()).sum();
    let pass = failed == 0 && violations == 0 && gap <= 1e-9 && gap_rhs <= 1e-9;
    outcome(
        pass,
        format!(
            "{} runs, {iterations} iterations, {violations} bound violations, max identity gap relative to ||Ay-b|| {gap_rhs:.2e} \
             (relative to operand scale {gap:.2e}), {fallbacks} Cholesky fallbacks, {failed} failed",
            inexact.len()
        ),
    )
}

fn criterion_5(log: &mut RunLog) -> Outcome {
    let o = quadratic_oracle(10, 5, 1, 5).unwrap();
    let lipschitz = o.problem.base().lipschitz();
    let (delta_lo, delta_hi) = (0.5, 2.0);
    let alpha = delta_lo / (2.0 * lipschitz * delta_hi * delta_hi);
    let step = StepConfig {
        strategy: Strategy::S3,
        delta_lo,
        delta_hi,
        gamma0: alpha,
        gamma1: alpha,
        a: 1e20,
        k_max: 10_000,
        ..StepConfig::default()
    };
    let cfg = SolverConfig {
        k_max: 10_000,
        log_value: false,
        ..SolverConfig::exact()
    };
    let mut rng = RngStream::new(0);
    let part = Partition::build(1, 1, &mut rng).unwrap();
    let rec = run(&o.system, &o.problem, part, &step, &cfg, &mut rng).unwrap();
    log.push("kkt oracle", &step, &rec);
    if let Some(f) = &rec.failure {
        return outcome(false, format!("run failed at k={}: {}", f.k, f.error));
    }
    let alpha_ok = rec.rows.iter().all(|r| r.alpha <= alpha);
    let err = (&rec.final_x - &o.x_star).norm();
    let d: Vec<f64> = rec
        .rows
        .iter()
        .map(|r| r.d_norm)
        .chain([rec.final_d_norm])
        .collect();
    // below this level ||d|| is rounding noise in forming x - grad f and its projection
    let floor = 1e3 * f64::EPSILON * (1.0 + d[0] + o.x_star.norm());
    let all_increases = (10..d.len() - 1).filter(|&k| d[k + 1] > d[k]).count();
    let increases: Vec<usize> = (10..d.len() - 1)
        .filter(|&k| d[k] > floor && d[k + 1] > d[k])
        .collect();
    let pass = alpha_ok && err <= 1e-6 && increases.is_empty();
    outcome(
        pass,
        format!(
            "L = {lipschitz:.3}, alpha = {alpha:.3e}, ||x - x*|| = {err:.2e}, {} increases of ||d|| after k=10 \
             above the rounding floor {floor:.1e} ({all_increases} including rounding-level values){}",
            increases.len(),
            increases
                .first()
                .map(|k| format!(" (first at k={k}: {:.3e} -> {:.3e})", d[*k], d[k + 1]))
                .unwrap_or_default()
        ),
    )
}

fn criterion_6(log: &RunLog) -> Outcome {
    let mut checked = 0usize;
    let mut violations = 0usize;
    let mut bound_failures = 0usize;
    for (_, lo, hi, rec) in &log.runs {
        for r in &rec.rows {
            checked += 1;
            if !(r.alpha * lo <= r.step_len && r.step_len <= r.alpha * hi) {
                violations += 1;
            }
        }
        if let Some(f) = &rec.failure {
            if matches!(f.error, psgleco::solver::SolverError::StepBound(_)) {
                bound_failures += 1;
            }
        }
    }
    outcome(
        violations == 0 && bound_failures == 0 && checked > 0,
        format!(
            "{checked} iterations over {} runs, {violations} violations, {bound_failures} aborted runs",
            log.runs.len()
        ),
    )
}

fn criterion_7() -> Outcome {
    let mut worst = 0.0_f64;
    for &(g0, g1, k_max) in &[
        (0.1, 1e-5, 10_000),
        (1.0, 1.0, 7),
        (3.7, 0.0, 1),
        (1e-3, 1e-9, 123_457),
    ] {
        let cfg = StepConfig {
            strategy: Strategy::S2,
            gamma0: g0,
            gamma1: g1,
            k_max,
            ..StepConfig::default()
        };
        let r0 = (cfg.cosine_decay(0) - g0).abs() / f64::max(g0.abs(), f64::MIN_POSITIVE);
        let r1 = (cfg.cosine_decay(k_max) - g1).abs() / f64::max(g1.abs(), f64::MIN_POSITIVE);
        worst = worst.max(r0).max(r1);
    }
    outcome(
        worst <= 1e-15,
        format!("max endpoint relative error {worst:.2e}"),
    )
}

fn criterion_8(log: &mut RunLog, dir: &Path) -> Outcome {
    let cfg = ExperimentConfig {
        problem: "synthetic:512,20".into(),
        constraint_fraction: 0.5,
        batch_size: 64,
        seeds: 10,
        strategy: "S2".into(),
        gamma0: psgleco_cli::config::OneOrMany::One(0.1),
        k_max: 10_000,
        projection: "exact".into(),
        log_f: false,
        svg: false,
        jobs: 4,
        ..Default::default()
    };
    let report = match run_experiment(&cfg, dir) {
        Ok(r) => r,
        Err(e) => return outcome(false, format!("experiment failed: {e:#}")),
    };
    let step = cfg.step_config().unwrap();
    for rec in &report.aggregate.runs {
        log.push("desk-scale", &step, rec);
    }
    let agg = &report.aggregate;
    if !agg.excluded.is_empty() || agg.runs.len() != 10 {
        return outcome(false, format!("{} runs failed", agg.excluded.len()));
    }
    let d0 = agg.rows[0].d_norm_mean;
    let d5000 = agg
        .rows
        .iter()
        .find(|r| r.k == 5000)
        .map(|r| r.d_norm_mean)
        .unwrap();
    let ratios: Vec<f64> = agg
        .runs
        .iter()
        .map(|r| r.min_d_norm() / r.rows[0].d_norm)
        .collect();
    let worst_min = ratios.iter().cloned().fold(0.0, f64::max);
    let best_min = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
    let over = ratios.iter().filter(|&&r| r > 0.01).count();
    let mean_curve_min = agg.min_mean_d_norm() / d0;
    let pass = d5000 <= 0.1 * d0 && worst_min <= 0.01;
    outcome(
        pass,
        format!(
            "mean ||d|| {d0:.3e} -> {d5000:.3e} at k=5000 (ratio {:.3e}); per-run min ratio worst {worst_min:.3e}, \
             best {best_min:.3e}, {over}/10 runs above 1e-2; mean-curve min ratio {mean_curve_min:.3e}",
            d5000 / d0
        ),
    )
}

fn hs50_oracle(iterations: usize, h: f64) -> f64 {
    let (f, a, _, x0) = hs50();
    let eig = (a.transpose() * &a).symmetric_eigen();
    // eigenvectors of A^T A with zero eigenvalue span the null space of A
    let mut order: Vec<usize> = (0..5).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let z = DMatrix::from_columns(&[
        eig.eigenvectors.column(order[0]),
        eig.eigenvectors.column(order[1]),
    ]);
    let mut x = x0;
    for _ in 0..iterations {
        let g = f.gradient(&x);
        x -= h * (&z * (z.transpose() * g));
    }
    f.value(&x)
}

fn criterion_9(log: &mut RunLog) -> Outcome {
    let (f, a, b, x0) = hs50();
    let sys = ConstraintSystem::new(a, b).unwrap();
    let obj = SingleComponent(Box::new(f));
    let step = StepConfig {
        strategy: Strategy::S1,
        alpha_const: HS50_ALPHA,
        k_max: 10_000,
        ..StepConfig::default()
    };
    let cfg = SolverConfig {
        k_max: 10_000,
        x0_mode: X0Mode::Given(x0),
        ..SolverConfig::exact()
    };
    let mut rng = RngStream::new(0);
    let part = Partition::build(1, 1, &mut rng).unwrap();
    let rec = run(&sys, &obj, part, &step, &cfg, &mut rng).unwrap();
    log.push("hs50", &step, &rec);
    if let Some(fail) = &rec.failure {
        return outcome(false, format!("run failed at k={}: {}", fail.k, fail.error));
    }
    let value = obj.value(&rec.final_x);
    let oracle = hs50_oracle(200_000, 1e-3);
    let pass = (0.0..=1e-4).contains(&value) && oracle <= 1e-4;
    outcome(
        pass,
        format!("alpha = {HS50_ALPHA}, final f = {value:.3e}, oracle f = {oracle:.3e}"),
    )
}

const HS50_ALPHA: f64 = 0.1;

fn central_difference(f: impl Fn(&DVector<f64>) -> f64, x: &DVector<f64>) -> DVector<f64> {
    let h = 1e-6 * (1.0 + x.norm());
    DVector::from_fn(x.len(), |i, _| {
        let mut xp = x.clone();
        let mut xm = x.clone();
        xp[i] += h;
        xm[i] -= h;
        (f(&xp) - f(&xm)) / (2.0 * h)
    })
}

fn criterion_10() -> Outcome {
    let mut rng = RngStream::new(10);
    let mut worst = 0.0_f64;
    let mut checks = 0usize;
    for (_, obj) in sample_objectives() {
        for _ in 0..20 {
            let x = random_vector(&mut rng, obj.dim(), 1.5);
            worst = worst.max(rel(
                &central_difference(|y| obj.value(y), &x),
                &obj.full_gradient(&x),
            ));
            let j = rng.rng().random_range(0..obj.num_components());
            worst = worst.max(rel(
                &central_difference(|y| obj.component_value(j, y), &x),
                &obj.component_gradient(j, &x),
            ));
            checks += 2;
        }
    }
    let base = QuadraticFunction::random(8, rng.rng());
    for _ in 0..20 {
        let x = random_vector(&mut rng, 8, 1.5);
        worst = worst.max(rel(
            &central_difference(|y| base.value(y), &x),
            &base.gradient(&x),
        ));
        checks += 1;
    }
    outcome(
        worst <= 1e-5,
        format!("{checks} checks, max relative error {worst:.2e}"),
    )
}

fn criterion_11(dir: &Path) -> Outcome {
    let config = dir.join("config.json");
    std::fs::write(
        &config,
        r#"{"problem": "synthetic:256,12", "batch_size": 32, "seeds": 3, "k_max": 300,
            "projection": "inexact", "jobs": 3, "strategy": "S2", "gamma0": 0.1}"#,
    )
    .unwrap();
    let exe = env!("CARGO_BIN_EXE_psgleco");
    let mut outputs = Vec::new();
    for tag in ["a", "b"] {
        let out = dir.join(tag);
        let status = Command::new(exe)
            .args(["run", "--config"])
            .arg(&config)
            .arg("--out")
            .arg(&out)
            .output()
            .unwrap();
        if !status.status.success() {
            return outcome(
                false,
                format!(
                    "invocation failed: {}",
                    String::from_utf8_lossy(&status.stderr)
                ),
            );
        }
        let mut files: Vec<_> = std::fs::read_dir(&out)
            .unwrap()
            .map(|e| e.unwrap().path())
            .filter(|p| p.extension().is_some_and(|e| e == "csv"))
            .collect();
        files.sort();
        let contents: Vec<(String, Vec<u8>)> = files
            .iter()
            .map(|p| {
                (
                    p.file_name().unwrap().to_string_lossy().into_owned(),
                    std::fs::read(p).unwrap(),
                )
            })
            .collect();
        outputs.push(contents);
    }
    let identical = outputs[0] == outputs[1];
    outcome(
        identical && outputs[0].len() == 4,
        format!(
            "{} CSV files, byte-identical: {identical}",
            outputs[0].len()
        ),
    )
}

fn timed(limit: Option<Duration>, f: impl FnOnce() -> Outcome) -> (Outcome, Duration) {
    let start = Instant::now();
    let mut out = f();
    let elapsed = start.elapsed();
    if let Some(limit) = limit {
        if elapsed > limit {
            out.pass = false;
            out.detail
                .push_str(&format!("; exceeded time limit {limit:?}"));
        }
    }
    (out, elapsed)
}

fn main() -> ExitCode {
    let tmp = tempfile::tempdir().unwrap();
    let secs = |s: u64| Some(Duration::from_secs(s));
    let mut log = RunLog::default();
    let mut results: Vec<(usize, &str, Outcome, Duration)> = Vec::new();

    let mut record = |n, name, (o, t)| results.push((n, name, o, t));
    record(
        1,
        "unbiased stochastic gradient",
        timed(secs(1), criterion_1),
    );
    record(2, "exact projection", timed(secs(1), criterion_2));
    record(
        4,
        "geometric infeasibility decay",
        timed(secs(30), || criterion_4(&mut log)),
    );
    record(
        3,
        "inexact residual contract",
        timed(None, || criterion_3(&mut log)),
    );
    record(
        5,
        "KKT oracle convergence",
        timed(secs(10), || criterion_5(&mut log)),
    );
    record(7, "cosine decay endpoints", timed(None, criterion_7));
    let dir8 = tmp.path().join("desk");
    record(
        8,
        "desk-scale stochastic run",
        timed(secs(120), || criterion_8(&mut log, &dir8)),
    );
    record(
        9,
        "HS50 deterministic check",
        timed(secs(30), || criterion_9(&mut log)),
    );
    record(
        10,
        "finite-difference gradients",
        timed(secs(5), criterion_10),
    );
    record(
        11,
        "end-to-end determinism",
        timed(None, || criterion_11(tmp.path())),
    );
    record(6, "step-bound invariant", timed(None, || criterion_6(&log)));

    results.sort_by_key(|r| r.0);
    let mut failed = 0;
    for (n, name, o, t) in &results {
        if !o.pass {
            failed += 1;
        }
        println!(
            "{} criterion {n:>2} {name}: {} [{:.2}s]",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail,
            t.as_secs_f64()
        );
    }
    println!(
        "{} of {} criteria passed",
        results.len() - failed,
        results.len()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
