//! Extremal-index, tail-process and dependence-condition studies driven by
//! an [`ExperimentConfig`].

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::estimators::{
    anticlustering_diagnostic, blocks_estimator, default_threshold, empirical_tail_process, mixing_diagnostic,
    runs_estimator, small_step_maximum, small_step_report, theta_threshold, BlockingScheme, DiagnosticReport,
    MIN_SMALL_STEP_REPLICATES,
};
use crate::harness::config::ExperimentConfig;
use crate::harness::flt::resolve_triple;
use crate::harness::svg::{self, Scale, Series};
use crate::models::{normalizing_sequence, simulate_replicate, simulate_series, truncated_means, ModelSpec};
use crate::stats::Estimate;
use crate::tailproc::{
    cluster_acceptance_rate, drift_trend, extremal_index_spectral, extremal_index_theoretical, nu_u_scaling_ratio,
    nu_u_tail_curve, spectral_triple_constants, DriftSource, DriftTrend, EmpiricalTailSampler, MaTailSampler, Side,
    TailSampler, TripleReport,
};

/// Lags on each side of the empirical tail windows.
pub const EMPIRICAL_LAGS: usize = 5;

/// Analytic tail sampler for i.i.d.-type and moving-average models.
pub fn model_sampler(spec: &ModelSpec) -> Option<MaTailSampler> {
    let m = match spec {
        ModelSpec::MovingAverage { coefficients, .. } => coefficients.len(),
        _ => 1,
    };
    MaTailSampler::for_model(spec, (m, m)).ok()
}

fn stem(config: &ExperimentConfig) -> String {
    format!("{}-seed{}", config.experiment_id, config.seed)
}

fn write_outputs<T: Serialize>(value: &T, json_name: &str, svgs: &[(String, String)], dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join(json_name);
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(&path, text)?;
    let mut out = vec![path];
    for (name, body) in svgs {
        let p = dir.join(name);
        std::fs::write(&p, body)?;
        out.push(p);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThetaPoint {
    pub n: usize,
    pub a_n: f64,
    pub threshold: f64,
    pub r_n: usize,
    pub runs: Option<f64>,
    pub blocks: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThetaStudy {
    pub experiment_id: String,
    pub config: ExperimentConfig,
    pub seed_from_env: Option<u64>,
    pub model: ModelSpec,
    pub theoretical: Option<f64>,
    pub spectral: Option<Estimate>,
    pub acceptance: Option<Estimate>,
    pub points: Vec<ThetaPoint>,
    pub artifacts: Vec<String>,
}

/// `n/16, n/8, n/4, n/2, n`, keeping sizes of at least 100.
pub fn default_n_grid(n: usize) -> Vec<usize> {
    let mut grid: Vec<usize> = [16, 8, 4, 2, 1].iter().map(|d| n / d).filter(|m| *m >= 100).collect();
    grid.dedup();
    if grid.is_empty() {
        grid.push(n);
    }
    grid
}

/// Runs and blocks estimates along `n_grid` (series `j` uses replicate `j`),
/// next to the closed-form and tail-process values of θ.
pub fn run_theta_study(config: &ExperimentConfig, seed_from_env: Option<u64>, n_grid: &[usize]) -> Result<ThetaStudy> {
    config.validate()?;
    let spec = config.model_spec()?;
    let alpha = spec.alpha();
    let points = n_grid
        .par_iter()
        .enumerate()
        .map(|(j, &n)| {
            let a_n = normalizing_sequence(&spec, n)?.value;
            let threshold = theta_threshold(a_n, alpha, n);
            let scheme = BlockingScheme::with_exponent(n, config.scheme_exponent)?;
            let x = simulate_replicate(&spec, n, config.seed, j as u64)?;
            Ok(ThetaPoint {
                n,
                a_n,
                threshold,
                r_n: scheme.r_n,
                runs: runs_estimator(&x, threshold, &scheme).ok(),
                blocks: blocks_estimator(&x, threshold, &scheme).ok(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let sampler = model_sampler(&spec);
    let reps = config.tail_reps;
    let mut artifacts = vec![format!("{}-theta.json", stem(config))];
    if config.wants("svg") {
        artifacts.push(format!("{}-theta.svg", stem(config)));
    }
    Ok(ThetaStudy {
        experiment_id: config.experiment_id.clone(),
        config: config.clone(),
        seed_from_env,
        theoretical: extremal_index_theoretical(&spec).ok(),
        spectral: sampler.as_ref().and_then(|s| extremal_index_spectral(s, reps, config.seed).ok()),
        acceptance: sampler.as_ref().and_then(|s| cluster_acceptance_rate(s, reps, config.seed).ok()),
        model: spec,
        points,
        artifacts,
    })
}

pub fn emit_theta_study(study: &ThetaStudy, dir: &Path) -> Result<Vec<PathBuf>> {
    let mut svgs = Vec::new();
    if let Some(name) = study.artifacts.get(1) {
        let pick = |f: fn(&ThetaPoint) -> Option<f64>| -> Vec<(f64, f64)> {
            study.points.iter().filter_map(|p| f(p).map(|v| (p.n as f64, v))).collect()
        };
        let runs = pick(|p| p.runs);
        let blocks = pick(|p| p.blocks);
        let mut series = vec![Series { label: "runs", points: runs }, Series { label: "blocks", points: blocks }];
        if let (Some(t), Some(first), Some(last)) = (study.theoretical, study.points.first(), study.points.last()) {
            series.push(Series { label: "closed form", points: vec![(first.n as f64, t), (last.n as f64, t)] });
        }
        let title = format!("{}: extremal index against n", study.experiment_id);
        svgs.push((name.clone(), svg::line_plot(&title, "n", "theta", &series, Scale::Log, Scale::Linear)));
    }
    write_outputs(study, &study.artifacts[0], &svgs, dir)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NuPoint {
    pub x: f64,
    pub upper: Estimate,
    pub lower: Estimate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingCheck {
    pub x: f64,
    pub s: f64,
    pub ratio: Estimate,
    pub target: f64,
    pub within_3se: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailStudy {
    pub experiment_id: String,
    pub config: ExperimentConfig,
    pub seed_from_env: Option<u64>,
    pub model: ModelSpec,
    /// `analytic` for moving-average type models, `empirical` otherwise.
    pub source: String,
    pub lags: (usize, usize),
    pub windows: Option<usize>,
    pub theta_spectral: Estimate,
    pub acceptance: Estimate,
    pub c_plus: Estimate,
    pub c_minus: Estimate,
    pub triple: Option<TripleReport>,
    pub u: f64,
    pub nu: Vec<NuPoint>,
    pub scaling: Option<ScalingCheck>,
    pub drift: Option<DriftTrend>,
    pub artifacts: Vec<String>,
}

pub const NU_X_GRID: [f64; 5] = [1.0, 2.0, 4.0, 8.0, 16.0];

/// Tail-process summaries: θ both ways, the spectral constants `c_±`, the
/// tails of `ν^(u)` at the smallest `u` of the grid, its scaling ratio at
/// `s = 2`, and the drift `b_u` along the grid.
pub fn run_tail_study(config: &ExperimentConfig, seed_from_env: Option<u64>) -> Result<TailStudy> {
    config.validate()?;
    let spec = config.model_spec()?;
    let seed = config.seed;
    let reps = config.tail_reps;
    let (sampler, source, lags, windows): (Box<dyn TailSampler>, &str, (usize, usize), Option<usize>) =
        match model_sampler(&spec) {
            Some(s) => {
                let m = s.coefficients().len();
                (Box::new(s), "analytic", (m, m), None)
            }
            None => {
                let x = simulate_series(&spec, config.n, seed)?;
                let lags = (EMPIRICAL_LAGS, EMPIRICAL_LAGS);
                let ws = empirical_tail_process(&x, default_threshold(&x), lags)?;
                let count = ws.len();
                (Box::new(EmpiricalTailSampler::new(spec.alpha(), ws)?), "empirical", lags, Some(count))
            }
        };
    let sampler: &dyn TailSampler = sampler.as_ref();
    let u = config.u_grid.iter().copied().fold(f64::INFINITY, f64::min).min(1.0);
    let upper = nu_u_tail_curve(sampler, u, &NU_X_GRID, Side::Upper, reps, seed)?;
    let lower = nu_u_tail_curve(sampler, u, &NU_X_GRID, Side::Lower, reps, seed)?;
    let nu = NU_X_GRID.iter().zip(upper).zip(lower).map(|((&x, upper), lower)| NuPoint { x, upper, lower }).collect();
    let target = 2f64.powf(-sampler.alpha());
    let scaling = nu_u_scaling_ratio(sampler, u, 1.0, 2.0, reps, seed)
        .ok()
        .map(|ratio| ScalingCheck { x: 1.0, s: 2.0, within_3se: ratio.within(target, 3.0), ratio, target });
    let drift_grid: Vec<f64> = config.u_grid.iter().copied().filter(|v| *v < 1.0).collect();
    let drift = if drift_grid.len() >= 2 {
        drift_trend(&drift_grid, DriftSource::Sampler(sampler), spec.p(), sampler.alpha(), reps, seed).ok()
    } else {
        None
    };
    let (c_plus, c_minus) = spectral_triple_constants(sampler, reps, seed)?;
    let mut artifacts = vec![format!("{}-tailproc.json", stem(config))];
    if config.wants("svg") {
        artifacts.push(format!("{}-tailproc-nu.svg", stem(config)));
    }
    Ok(TailStudy {
        experiment_id: config.experiment_id.clone(),
        config: config.clone(),
        seed_from_env,
        source: source.into(),
        lags,
        windows,
        theta_spectral: extremal_index_spectral(sampler, reps, seed)?,
        acceptance: cluster_acceptance_rate(sampler, reps, seed)?,
        c_plus,
        c_minus,
        triple: resolve_triple(config, &spec).ok(),
        model: spec,
        u,
        nu,
        scaling,
        drift,
        artifacts,
    })
}

pub fn emit_tail_study(study: &TailStudy, dir: &Path) -> Result<Vec<PathBuf>> {
    let mut svgs = Vec::new();
    if let Some(name) = study.artifacts.get(1) {
        let upper: Vec<(f64, f64)> = study.nu.iter().filter(|p| p.upper.value > 0.0).map(|p| (p.x, p.upper.value)).collect();
        let lower: Vec<(f64, f64)> = study.nu.iter().filter(|p| p.lower.value > 0.0).map(|p| (p.x, p.lower.value)).collect();
        let series = [Series { label: "upper tail", points: upper }, Series { label: "lower tail", points: lower }];
        let title = format!("{}: tails of nu^(u), u = {}", study.experiment_id, study.u);
        svgs.push((name.clone(), svg::line_plot(&title, "x", "nu^(u) tail", &series, Scale::Log, Scale::Log)));
    }
    write_outputs(study, &study.artifacts[0], &svgs, dir)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnoseStudy {
    pub experiment_id: String,
    pub config: ExperimentConfig,
    pub seed_from_env: Option<u64>,
    pub model: ModelSpec,
    pub a_n: f64,
    pub scheme: BlockingScheme,
    pub anticlustering: Option<DiagnosticReport>,
    pub small_step: Option<DiagnosticReport>,
    pub mixing: Option<DiagnosticReport>,
    /// Reasons for skipped diagnostics.
    pub notes: Vec<String>,
    pub artifacts: Vec<String>,
}

/// Anti-clustering on replicate 0, the small-step probabilities and the
/// mixing comparison over `replicates` series.
pub fn run_diagnose(config: &ExperimentConfig, seed_from_env: Option<u64>) -> Result<DiagnoseStudy> {
    config.validate()?;
    let spec = config.model_spec()?;
    let (n, seed) = (config.n, config.seed);
    let a_n = normalizing_sequence(&spec, n)?.value;
    let scheme = BlockingScheme::with_exponent(n, config.scheme_exponent)?;
    let mut notes = Vec::new();

    let x = simulate_replicate(&spec, n, seed, 0)?;
    let u_abs = theta_threshold(a_n, spec.alpha(), n);
    let mut m_grid: Vec<usize> = [1, 2, 3, 5, 10, 20, 50, 100].into_iter().filter(|m| *m <= scheme.r_n).collect();
    m_grid.dedup();
    let anticlustering = anticlustering_diagnostic(&x, u_abs, &m_grid, &scheme, Some(u_abs))
        .map_err(|e| notes.push(format!("anticlustering: {e}")))
        .ok();

    let small_step = if config.replicates < MIN_SMALL_STEP_REPLICATES || config.u_grid.is_empty() {
        notes.push(format!("small_step: needs at least {MIN_SMALL_STEP_REPLICATES} replicates and a u grid"));
        None
    } else {
        let levels: Vec<f64> = config.u_grid.iter().map(|u| u * a_n).collect();
        let m_u: Vec<f64> = truncated_means(&spec, &levels, config.centering_draws, seed)?.iter().map(|e| e.value / a_n).collect();
        let per_rep: Vec<Vec<f64>> = (0..config.replicates as u64)
            .into_par_iter()
            .map(|r| {
                let xs = simulate_replicate(&spec, n, seed, r)?;
                Ok(config.u_grid.iter().zip(&m_u).map(|(&u, &m)| small_step_maximum(&xs, a_n, u, m)).collect())
            })
            .collect::<Result<_>>()?;
        let maxima: Vec<Vec<f64>> = (0..config.u_grid.len()).map(|j| per_rep.iter().map(|row: &Vec<f64>| row[j]).collect()).collect();
        let alpha = (spec.alpha() < 1.0).then_some(spec.alpha());
        small_step_report(&maxima, a_n, &config.u_grid, config.small_step_delta, alpha)
            .map_err(|e| notes.push(format!("small_step: {e}")))
            .ok()
    };

    let mixing = mixing_diagnostic(|r| simulate_replicate(&spec, n, seed, r), a_n, &scheme, config.replicates)
        .map_err(|e| notes.push(format!("mixing: {e}")))
        .ok();

    let s = stem(config);
    let mut artifacts = vec![format!("{s}-diagnose.json")];
    if config.wants("svg") {
        if anticlustering.is_some() {
            artifacts.push(format!("{s}-anticlustering.svg"));
        }
        if small_step.is_some() {
            artifacts.push(format!("{s}-small-step.svg"));
        }
    }
    Ok(DiagnoseStudy {
        experiment_id: config.experiment_id.clone(),
        config: config.clone(),
        seed_from_env,
        model: spec,
        a_n,
        scheme,
        anticlustering,
        small_step,
        mixing,
        notes,
        artifacts,
    })
}

fn curve_plot(title: &str, x_label: &str, report: &DiagnosticReport, x_scale: Scale) -> String {
    let points: Vec<(f64, f64)> = report.curve.iter().map(|p| (p.x, p.value)).collect();
    let lo: Vec<(f64, f64)> = report.curve.iter().zip(&report.intervals).map(|(p, i)| (p.x, i.0)).collect();
    let hi: Vec<(f64, f64)> = report.curve.iter().zip(&report.intervals).map(|(p, i)| (p.x, i.1)).collect();
    let series = [
        Series { label: "estimate", points },
        Series { label: "95% lower", points: lo },
        Series { label: "95% upper", points: hi },
    ];
    svg::line_plot(title, x_label, "probability", &series, x_scale, Scale::Linear)
}

pub fn emit_diagnose(study: &DiagnoseStudy, dir: &Path) -> Result<Vec<PathBuf>> {
    let mut svgs = Vec::new();
    for name in &study.artifacts[1..] {
        if name.ends_with("-anticlustering.svg") {
            if let Some(r) = &study.anticlustering {
                svgs.push((name.clone(), curve_plot(&format!("{}: anti-clustering", study.experiment_id), "m", r, Scale::Log)));
            }
        } else if let Some(r) = &study.small_step {
            svgs.push((name.clone(), curve_plot(&format!("{}: small steps", study.experiment_id), "u", r, Scale::Log)));
        }
    }
    write_outputs(study, &study.artifacts[0], &svgs, dir)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ma_config() -> ExperimentConfig {
        ExperimentConfig {
            experiment_id: "ma".into(),
            model: "ma".into(),
            alpha: Some(1.0),
            coefficients: Some(vec![0.5, 0.5]),
            n: 20_000,
            replicates: 20,
            tail_reps: 20_000,
            centering_draws: 10_000,
            ..Default::default()
        }
    }

    #[test]
    fn n_grid_defaults() {
        assert_eq!(default_n_grid(1600), vec![100, 200, 400, 800, 1600]);
        assert_eq!(default_n_grid(50), vec![50]);
    }

    #[test]
    fn theta_study_on_ma() {
        let cfg = ma_config();
        let s = run_theta_study(&cfg, None, &[5000, 20_000]).unwrap();
        assert_eq!(s.theoretical, Some(0.5));
        assert!(s.acceptance.as_ref().unwrap().within(0.5, 4.0));
        assert!(s.points.iter().all(|p| p.runs.is_some()));
        let dir = tempfile::tempdir().unwrap();
        assert_eq!(emit_theta_study(&s, dir.path()).unwrap().len(), 2);
    }

    #[test]
    fn tail_study_on_ma() {
        let s = run_tail_study(&ma_config(), None).unwrap();
        assert_eq!(s.source, "analytic");
        assert!(s.theta_spectral.within(0.5, 4.0));
        assert!((s.c_plus.value - 1.0).abs() < 0.05, "{:?}", s.c_plus);
        assert!(s.nu.windows(2).all(|w| w[0].upper.value >= w[1].upper.value));
        assert!(s.drift.is_some());
        let dir = tempfile::tempdir().unwrap();
        assert_eq!(emit_tail_study(&s, dir.path()).unwrap().len(), 2);
    }

    #[test]
    fn tail_study_uses_empirical_windows_for_garch() {
        let cfg = ExperimentConfig {
            model: "garch11sq".into(),
            alpha0: Some(0.1),
            alpha1: Some(0.7),
            beta1: Some(0.0),
            n: 40_000,
            tail_reps: 2000,
            u_grid: vec![0.1, 0.05],
            ..Default::default()
        };
        let s = run_tail_study(&cfg, None).unwrap();
        assert_eq!(s.source, "empirical");
        assert!(s.windows.unwrap() >= 100);
        assert!(s.acceptance.value > 0.0 && s.acceptance.value < 1.0);
    }

    #[test]
    fn diagnose_notes_skipped_parts() {
        let s = run_diagnose(&ma_config(), None).unwrap();
        assert!(s.anticlustering.is_some());
        assert!(s.small_step.is_none());
        assert!(s.mixing.is_some());
        assert_eq!(s.notes.len(), 1);
        let dir = tempfile::tempdir().unwrap();
        assert_eq!(emit_diagnose(&s, dir.path()).unwrap().len(), 2);
    }
}
