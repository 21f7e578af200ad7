//! `clusterflt`: simulate heavy-tailed series and their stable limits,
//! estimate extremal indices and Lévy triples, and verify the functional
//! limit theorem.

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use clusterflt_core::harness::studies::{default_n_grid, emit_diagnose, emit_tail_study, emit_theta_study};
use clusterflt_core::harness::{
    emit_report, resolve_triple, run_diagnose, run_flt_experiment, run_metric_suite, run_tail_study, run_theta_study,
    ExperimentConfig,
};
use clusterflt_core::limits::{default_u_trunc, simulate_limit_marginals, write_batch_csv};
use clusterflt_core::models::{centering_sequence_with, normalizing_sequence, simulate_replicate, terminal_partial_sum, write_series_csv};
use rayon::prelude::*;
use serde_json::json;

#[derive(Parser, Debug)]
#[command(name = "clusterflt", version, about)]
struct Cli {
    /// Flat TOML experiment configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed; overrides the config file and CLUSTERFLT_SEED.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory; overrides `out` in the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Sample series, normalized partial sums V_n(1) and limit marginals V(1).
    Simulate,
    /// Runs and blocks estimates of the extremal index across sample sizes.
    Theta {
        /// Comma-separated sample sizes; defaults to n/16, ..., n.
        #[arg(long, value_delimiter = ',')]
        n_grid: Vec<usize>,
    },
    /// Lévy triple for the configured model.
    Triple,
    /// Compare prelimit and limit marginals with two-sample KS tests.
    VerifyFlt,
    /// Tail-process summaries: θ, c_±, ν^(u) tails and scaling, drift b_u.
    Tailproc,
    /// Anti-clustering, small-step and mixing diagnostics.
    Diagnose,
    /// M1 metric self-tests.
    Metric {
        #[arg(long, default_value_t = 1000)]
        pairs: usize,
        #[arg(long, default_value_t = 500)]
        oracle_cases: usize,
        #[arg(long, default_value_t = clusterflt_core::cadlag::DEFAULT_M1_TOL)]
        tol: f64,
    },
}

/// Whether the command's acceptance check held.
enum Verdict {
    Pass,
    Fail,
}

fn load_config(cli: &Cli) -> Result<(ExperimentConfig, Option<u64>)> {
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::from_file(path).with_context(|| format!("reading {}", path.display()))?,
        None => ExperimentConfig::default(),
    };
    let env_seed = cfg.apply_env_seed()?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.out = out.clone();
    }
    Ok((cfg, env_seed))
}

fn print_files(files: &[PathBuf]) {
    for f in files {
        println!("{}", f.display());
    }
}

fn write_json(dir: &Path, name: &str, value: &serde_json::Value) -> Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join(name);
    std::fs::write(&path, serde_json::to_string_pretty(value)? + "\n")?;
    Ok(path)
}

fn simulate(cfg: &ExperimentConfig, env_seed: Option<u64>) -> Result<Verdict> {
    let spec = cfg.model_spec()?;
    let a = normalizing_sequence(&spec, cfg.n)?;
    let b = centering_sequence_with(&spec, a.value, cfg.centering_draws, cfg.seed)?;
    let stem = format!("{}-seed{}", cfg.experiment_id, cfg.seed);
    let dir = &cfg.out;
    std::fs::create_dir_all(dir)?;
    let mut files = Vec::new();

    let series_path = dir.join(format!("{stem}-series.csv"));
    write_series_csv(&simulate_replicate(&spec, cfg.n, cfg.seed, 0)?, BufWriter::new(File::create(&series_path)?))?;
    files.push(series_path);

    let sums: Vec<f64> = (0..cfg.replicates as u64)
        .into_par_iter()
        .map(|r| Ok(terminal_partial_sum(&simulate_replicate(&spec, cfg.n, cfg.seed, r)?, a.value, b.value)))
        .collect::<clusterflt_core::Result<_>>()?;
    let sums_path = dir.join(format!("{stem}-partial-sums.csv"));
    write_batch_csv(&sums, BufWriter::new(File::create(&sums_path)?))?;
    files.push(sums_path);

    let mut notes = Vec::new();
    let triple = match resolve_triple(cfg, &spec) {
        Ok(t) => {
            let u = cfg.u_trunc.unwrap_or_else(|| default_u_trunc(t.alpha));
            let limit = simulate_limit_marginals(&t.triple()?, u, cfg.limit_draws(), cfg.seed)?;
            let path = dir.join(format!("{stem}-limit.csv"));
            write_batch_csv(&limit, BufWriter::new(File::create(&path)?))?;
            files.push(path);
            Some(t)
        }
        Err(e) => {
            notes.push(format!("limit draws skipped: {e}"));
            None
        }
    };
    let summary = json!({
        "experiment_id": cfg.experiment_id,
        "config": cfg,
        "seed_from_env": env_seed,
        "model": spec,
        "a_n": a,
        "b_n": b,
        "triple": triple,
        "notes": notes,
        "artifacts": files.iter().map(|f| f.file_name().unwrap().to_string_lossy().into_owned()).collect::<Vec<_>>(),
    });
    files.insert(0, write_json(dir, &format!("{stem}-simulate.json"), &summary)?);
    print_files(&files);
    Ok(Verdict::Pass)
}

fn triple(cfg: &ExperimentConfig, env_seed: Option<u64>) -> Result<Verdict> {
    let spec = cfg.model_spec()?;
    let t = resolve_triple(cfg, &spec)?;
    let value = json!({
        "experiment_id": cfg.experiment_id,
        "config": cfg,
        "seed_from_env": env_seed,
        "model": spec,
        "triple": t,
    });
    let path = write_json(&cfg.out, &format!("{}-seed{}-triple.json", cfg.experiment_id, cfg.seed), &value)?;
    println!("{}", serde_json::to_string(&t)?);
    println!("{}", path.display());
    Ok(Verdict::Pass)
}

fn run(cli: &Cli) -> Result<Verdict> {
    if let Command::Metric { pairs, oracle_cases, tol } = cli.command {
        let seed = load_config(cli)?.0.seed;
        let out = cli.out.clone().unwrap_or_else(|| PathBuf::from("out"));
        let suite = run_metric_suite(pairs, oracle_cases, tol, seed)?;
        let path = write_json(&out, &format!("metric-seed{seed}.json"), &serde_json::to_value(&suite)?)?;
        println!("{}", path.display());
        return Ok(if suite.pass { Verdict::Pass } else { Verdict::Fail });
    }
    let (cfg, env_seed) = load_config(cli)?;
    match &cli.command {
        Command::Simulate => simulate(&cfg, env_seed),
        Command::Triple => triple(&cfg, env_seed),
        Command::Theta { n_grid } => {
            let grid = if n_grid.is_empty() { default_n_grid(cfg.n) } else { n_grid.clone() };
            let study = run_theta_study(&cfg, env_seed, &grid)?;
            print_files(&emit_theta_study(&study, &cfg.out)?);
            Ok(Verdict::Pass)
        }
        Command::VerifyFlt => {
            let outcome = run_flt_experiment(&cfg, env_seed)?;
            print_files(&emit_report(&outcome, &cfg.out)?);
            let r = &outcome.report;
            for k in &r.ks {
                eprintln!("t = {}: KS p = {:?}{}", k.time, k.p_value, if r.underpowered { " (underpowered)" } else { "" });
            }
            Ok(if r.pass { Verdict::Pass } else { Verdict::Fail })
        }
        Command::Tailproc => {
            let study = run_tail_study(&cfg, env_seed)?;
            print_files(&emit_tail_study(&study, &cfg.out)?);
            Ok(match &study.scaling {
                Some(s) if !s.within_3se => Verdict::Fail,
                _ => Verdict::Pass,
            })
        }
        Command::Diagnose => {
            let study = run_diagnose(&cfg, env_seed)?;
            print_files(&emit_diagnose(&study, &cfg.out)?);
            Ok(Verdict::Pass)
        }
        Command::Metric { .. } => unreachable!(),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let start = Instant::now();
    if let Some(w) = cli.workers {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(w.max(1)).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    let code = match run(&cli) {
        Ok(Verdict::Pass) => ExitCode::SUCCESS,
        Ok(Verdict::Fail) => {
            eprintln!("acceptance check failed");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    };
    eprintln!("runtime: {:.2} s", start.elapsed().as_secs_f64());
    code
}
