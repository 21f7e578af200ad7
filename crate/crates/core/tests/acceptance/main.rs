//! Acceptance gate: runs every criterion at its stated tolerance and prints
//! one PASS/FAIL line per criterion. Exits nonzero if any criterion fails.

use std::time::{Duration, Instant};

use clusterflt_core::cadlag::m1_distance;
use clusterflt_core::estimators::{blocks_estimator, runs_estimator, theta_threshold, BlockingScheme};
use clusterflt_core::harness::{emit_report, run_flt_experiment, run_metric_suite, ExperimentConfig, MASTER_SEEDS};
use clusterflt_core::models::{normalizing_sequence, simulate_replicate, simulate_series, MarginalSpec, ModelSpec};
use clusterflt_core::pointproc::{lambda_membership, summation_functional, Atom, PointMeasure};
use clusterflt_core::rng::domain_stream;
use clusterflt_core::stats::mean_se;
use clusterflt_core::tailproc::{cluster_acceptance_rate, garch_cplus, nu_u_scaling_ratio, MaTailSampler};
use clusterflt_core::Result;
use rand::Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Result<Outcome> {
    Ok(Outcome { pass, detail })
}

fn run(id: u32, name: &str, limit: Option<Duration>, f: impl FnOnce() -> Result<Outcome>) -> bool {
    let start = Instant::now();
    let result = f();
    let elapsed = start.elapsed();
    let (mut pass, mut detail) = match result {
        Ok(o) => (o.pass, o.detail),
        Err(e) => (false, format!("error: {e}")),
    };
    if let Some(limit) = limit {
        if elapsed > limit {
            pass = false;
            detail.push_str(&format!("; runtime over {} s", limit.as_secs()));
        }
    }
    let tag = if pass { "PASS" } else { "FAIL" };
    println!("[{tag}] {id:>2}. {name}: {detail} ({:.1} s)", elapsed.as_secs_f64());
    pass
}

fn ma(alpha: f64, p: f64, c: &[f64]) -> ModelSpec {
    ModelSpec::moving_average(MarginalSpec::new(alpha, p, 1.0).unwrap(), c).unwrap()
}

fn theta_estimators(spec: &ModelSpec, n: usize, seed: u64) -> Result<(f64, f64)> {
    let x = simulate_series(spec, n, seed)?;
    let a_n = normalizing_sequence(spec, n)?.value;
    let u = theta_threshold(a_n, spec.alpha(), n);
    let scheme = BlockingScheme::with_exponent(n, 0.3)?;
    Ok((blocks_estimator(&x, u, &scheme)?, runs_estimator(&x, u, &scheme)?))
}

fn criterion_1() -> Result<Outcome> {
    let n = 200_000;
    let (b, r) = theta_estimators(&ma(1.0, 1.0, &[0.5, 0.5]), n, 1)?;
    let iid = ModelSpec::iid(MarginalSpec::new(1.0, 1.0, 1.0)?);
    let (bi, ri) = theta_estimators(&iid, n, 1)?;
    let ok = |v: f64, t: f64| (v - t).abs() <= 0.05;
    outcome(
        ok(b, 0.5) && ok(r, 0.5) && ok(bi, 1.0) && ok(ri, 1.0),
        format!("MA blocks {b:.4}, runs {r:.4} (target 0.5 ± 0.05); IID blocks {bi:.4}, runs {ri:.4} (target 1 ± 0.05)"),
    )
}

fn flt_seeds(base: ExperimentConfig) -> Result<Outcome> {
    let mut passes = 0;
    let mut min_p = Vec::new();
    for seed in MASTER_SEEDS {
        let cfg = ExperimentConfig { seed, ..base.clone() };
        let report = run_flt_experiment(&cfg, None)?.report;
        let ps: Vec<f64> = report.ks.iter().map(|k| k.p_value.unwrap_or(0.0)).collect();
        let p = ps.iter().copied().fold(1.0, f64::min);
        if report.ks.iter().all(|k| k.pass) {
            passes += 1;
        }
        min_p.push(format!("{p:.3}"));
    }
    outcome(passes >= 8, format!("{passes}/10 master seeds with all KS p > 0.01; min p per seed [{}]", min_p.join(", ")))
}

fn criterion_2() -> Result<Outcome> {
    flt_seeds(ExperimentConfig {
        experiment_id: "accept-ma".into(),
        model: "ma".into(),
        alpha: Some(0.5),
        p: 1.0,
        coefficients: Some(vec![0.25, 0.25]),
        n: 10_000,
        replicates: 1000,
        centering_draws: 40_000_000,
        tail_reps: 10_000,
        ..Default::default()
    })
}

fn criterion_3() -> Result<Outcome> {
    flt_seeds(ExperimentConfig {
        experiment_id: "accept-iid".into(),
        model: "iid".into(),
        alpha: Some(0.8),
        p: 1.0,
        n: 10_000,
        replicates: 1000,
        tail_reps: 10_000,
        ..Default::default()
    })
}

fn criterion_4() -> Result<Outcome> {
    let tol = 1e-6;
    let s = run_metric_suite(1000, 500, tol, 2024)?;
    let stairs: Vec<String> = s.staircase.iter().map(|r| format!("n={} M1 {:.6} unif {}", r.n, r.m1, r.uniform)).collect();
    outcome(
        s.pass,
        format!(
            "axiom violations {}, triangle violations {} (max excess {:.2e}), domination violations {}, l1 violations {}; {}; oracle max error {:.2e} over {} cases",
            s.axiom_violations,
            s.triangle_violations,
            s.triangle_max_excess,
            s.domination_violations,
            s.l1_violations,
            stairs.join(", "),
            s.oracle_max_error,
            s.oracle_cases
        ),
    )
}

/// Random measure in the continuity set: up to 10 atoms on a few times from
/// the 1/100 grid in (0, 1), one sign per time, marks at least `2δ` away
/// from `±u`.
fn lambda_member(rng: &mut impl Rng, u: f64, delta: f64) -> PointMeasure {
    let k = rng.random_range(1..=10);
    let groups = rng.random_range(1..=k);
    let times: Vec<f64> = (0..groups).map(|_| f64::from(rng.random_range(1..100u32)) / 100.0).collect();
    let signs: Vec<f64> = (0..groups).map(|_| if rng.random_bool(0.5) { 1.0 } else { -1.0 }).collect();
    let atoms = (0..k)
        .map(|_| {
            let g = rng.random_range(0..groups);
            let size = if rng.random_bool(0.8) {
                u + 2.0 * delta + rng.random_range(0.0..3.0)
            } else {
                rng.random_range(0.0..u - 2.0 * delta)
            };
            Atom { time: times[g], mark: signs[g] * size }
        })
        .collect();
    PointMeasure::new(atoms).unwrap()
}

fn criterion_5() -> Result<Outcome> {
    let (u, delta) = (0.5, 1e-3);
    let mut violations = 0;
    let mut worst: f64 = 0.0;
    for i in 0..200 {
        let mut rng = domain_stream(5, 10, i);
        let m = lambda_member(&mut rng, u, delta);
        assert!(lambda_membership(&m, u).in_lambda());
        let k = m.len() as f64;
        let perturbed = PointMeasure::new(
            m.atoms()
                .iter()
                .map(|a| Atom {
                    time: a.time + rng.random_range(-delta..=delta),
                    mark: a.mark + rng.random_range(-delta..=delta),
                })
                .collect(),
        )?;
        let d = m1_distance(&summation_functional(&m, u)?, &summation_functional(&perturbed, u)?, 1e-8)?;
        let bound = k * delta + 1e-6;
        worst = worst.max(d / bound);
        if d > bound {
            violations += 1;
        }
    }
    outcome(violations == 0, format!("{violations} violations in 200 measures; max d / (kδ + 1e-6) = {worst:.3}"))
}

fn criterion_6() -> Result<Outcome> {
    let alpha = 1.0;
    let sampler = MaTailSampler::new(&[0.5, 0.5], alpha, 1.0, (2, 2))?;
    let r = nu_u_scaling_ratio(&sampler, 1e-3, 1.0, 2.0, 100_000, 6)?;
    let target = 2f64.powf(-alpha);
    outcome(r.within(target, 3.0), format!("ratio {:.4} ± {:.4} (SE), target 2^-α = {target}", r.value, r.se))
}

fn criterion_7() -> Result<Outcome> {
    let alpha = 0.5;
    let spec = ModelSpec::iid(MarginalSpec::new(alpha, 1.0, 1.0)?);
    let n = 10_000;
    let reps = 2000u64;
    let a_n = normalizing_sequence(&spec, n)?.value;
    let b_n = clusterflt_core::models::centering_sequence(&spec, a_n)?.value;
    let mut truncated = Vec::with_capacity(reps as usize);
    let mut identity_gap: f64 = 0.0;
    for r in 0..reps {
        let x = simulate_replicate(&spec, n, 7, r)?;
        let uncentered: f64 = x.iter().sum::<f64>() / a_n;
        let centered = clusterflt_core::models::terminal_partial_sum(&x, a_n, b_n);
        identity_gap = identity_gap.max(((uncentered - centered) - n as f64 * b_n / a_n).abs());
        truncated.push(x.iter().filter(|v| v.abs() <= a_n).sum::<f64>() / a_n);
    }
    let (m, se) = mean_se(&truncated);
    let target = alpha / (1.0 - alpha);
    let ok = (m - target).abs() <= 3.0 * se && identity_gap <= 1e-6 * (1.0 + n as f64 * b_n / a_n);
    outcome(
        ok,
        format!(
            "truncated-sum mean {m:.4} ± {se:.4} (SE) vs α/(1−α) = {target}; uncentered − centered = n b_n/a_n = {:.6} up to {identity_gap:.1e}",
            n as f64 * b_n / a_n
        ),
    )
}

fn criterion_8() -> Result<Outcome> {
    let c = garch_cplus(1.0, 0.0, 100_000, 1000, 8)?;
    let longer = garch_cplus(1.0, 0.0, 100_000, 2000, 8)?;
    let v = c.c_plus.value;
    let diff = (v - longer.c_plus.value).abs();
    let combined = c.c_plus.se.hypot(longer.c_plus.se);
    let stable = diff <= 2.0 * combined;
    outcome(
        (v - 1.0).abs() <= 0.05 && stable,
        format!(
            "c_plus {v:.4} ± {:.4} (target 1 ± 0.05); T=2000 gives {:.4}, difference {diff:.4} vs 2 SE {:.4}",
            c.c_plus.se,
            longer.c_plus.value,
            2.0 * combined
        ),
    )
}

fn criterion_9() -> Result<Outcome> {
    let sampler = MaTailSampler::new(&[0.5, 0.5], 1.0, 1.0, (2, 2))?;
    let r = cluster_acceptance_rate(&sampler, 100_000, 9)?;
    outcome((r.value - 0.5).abs() <= 0.02, format!("acceptance fraction {:.4} over 1e5 attempts (target 0.5 ± 0.02)", r.value))
}

fn criterion_10() -> Result<Outcome> {
    let cfg = ExperimentConfig {
        experiment_id: "determinism".into(),
        model: "ma".into(),
        alpha: Some(0.5),
        coefficients: Some(vec![0.25, 0.25]),
        n: 2000,
        replicates: 300,
        centering_draws: 200_000,
        tail_reps: 5000,
        formats: vec!["json".into()],
        ..Default::default()
    };
    let dir = tempfile::tempdir()?;
    let mut bytes = Vec::new();
    for workers in [1, 8] {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(workers).build().expect("thread pool");
        let files = pool.install(|| emit_report(&run_flt_experiment(&cfg, None)?, dir.path()))?;
        bytes.push(std::fs::read(&files[0])?);
    }
    outcome(bytes[0] == bytes[1], format!("JSON report of {} bytes at 1 and 8 workers identical: {}", bytes[0].len(), bytes[0] == bytes[1]))
}

fn main() {
    let mut all = true;
    all &= run(1, "extremal index, MA and IID control", Some(Duration::from_secs(60)), criterion_1);
    all &= run(2, "FLT marginals, MA", Some(Duration::from_secs(600)), criterion_2);
    all &= run(3, "FLT marginals, IID", None, criterion_3);
    all &= run(4, "M1 metric suite", Some(Duration::from_secs(300)), criterion_4);
    all &= run(5, "summation functional continuity", None, criterion_5);
    all &= run(6, "nu^(u) scaling", None, criterion_6);
    all &= run(7, "centering removal", None, criterion_7);
    all &= run(8, "GARCH constant", None, criterion_8);
    all &= run(9, "cluster acceptance rate equals theta", None, criterion_9);
    all &= run(10, "determinism across worker counts", None, criterion_10);
    if !all {
        std::process::exit(1);
    }
}
