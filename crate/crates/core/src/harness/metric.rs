//! Self-tests for the M1 distance: metric axioms, domination by the uniform
//! distance, the converging staircase, and agreement with a brute-force
//! discrete Fréchet oracle on lattice paths.

use rand::seq::index::sample;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cadlag::{l1_distance, m1_distance, uniform_distance, CadlagPath, CompletedGraph};
use crate::error::Result;
use crate::rng::{domain, domain_stream, SimRng};

/// Lattice step of the oracle corpus: jump times and values are multiples
/// of this.
pub const LATTICE: f64 = 1.0 / 40.0;
/// Oracle sampling step along each graph segment. The discrete distance
/// exceeds the continuous one by at most this much.
pub const ORACLE_SPACING: f64 = 1.0 / 2000.0;

/// Points along the completed graph, at most `spacing` apart in L∞ and
/// including every vertex.
pub fn sample_graph(graph: &CompletedGraph, spacing: f64) -> Vec<(f64, f64)> {
    let pts = graph.points();
    let mut out = vec![pts[0]];
    for (p, q) in graph.segments() {
        let len = (q.0 - p.0).abs().max((q.1 - p.1).abs());
        let steps = (len / spacing).ceil().max(1.0) as usize;
        for k in 1..=steps {
            let s = k as f64 / steps as f64;
            out.push((p.0 + s * (q.0 - p.0), p.1 + s * (q.1 - p.1)));
        }
    }
    out
}

fn linf(p: (f64, f64), q: (f64, f64)) -> f64 {
    (p.0 - q.0).abs().max((p.1 - q.1).abs())
}

/// Discrete Fréchet distance (L∞ ground cost) between two point sequences.
pub fn discrete_frechet(p: &[(f64, f64)], q: &[(f64, f64)]) -> f64 {
    let m = q.len();
    let mut prev = vec![f64::INFINITY; m];
    let mut cur = vec![0.0; m];
    for (i, &pi) in p.iter().enumerate() {
        for j in 0..m {
            let d = linf(pi, q[j]);
            let reach = match (i, j) {
                (0, 0) => 0.0,
                (0, _) => cur[j - 1],
                (_, 0) => prev[0],
                _ => prev[j].min(prev[j - 1]).min(cur[j - 1]),
            };
            cur[j] = d.max(reach);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[m - 1]
}

/// Brute-force M1 oracle: discrete Fréchet distance between completed
/// graphs sampled every `spacing`. It never undershoots the M1 distance and
/// overshoots by at most `spacing`.
pub fn grid_oracle_m1(a: &CadlagPath, b: &CadlagPath, spacing: f64) -> f64 {
    discrete_frechet(&sample_graph(&a.completed_graph(), spacing), &sample_graph(&b.completed_graph(), spacing))
}

fn point_segment(p: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    // Graph segments are axis-parallel, so clamping is the L∞ projection.
    let t = p.0.clamp(a.0.min(b.0), a.0.max(b.0));
    let x = p.1.clamp(a.1.min(b.1), a.1.max(b.1));
    linf(p, (t, x))
}

fn directed_hausdorff(a: &CompletedGraph, b: &CompletedGraph, spacing: f64) -> f64 {
    let segs: Vec<_> = b.segments().collect();
    sample_graph(a, spacing)
        .into_iter()
        .map(|p| segs.iter().map(|&(s, e)| point_segment(p, s, e)).fold(f64::INFINITY, f64::min))
        .fold(0.0, f64::max)
}

/// L∞ Hausdorff distance between completed graphs, sampled at `spacing`
/// (error at most `spacing / 2`). For two nondecreasing paths it coincides
/// with the M1 distance.
pub fn graph_hausdorff(a: &CadlagPath, b: &CadlagPath, spacing: f64) -> f64 {
    let (ga, gb) = (a.completed_graph(), b.completed_graph());
    directed_hausdorff(&ga, &gb, spacing).max(directed_hausdorff(&gb, &ga, spacing))
}

/// Step path with up to `max_jumps` jumps at uniform times and normal
/// values.
pub fn random_step_path(rng: &mut SimRng, max_jumps: usize) -> CadlagPath {
    let k = rng.random_range(0..=max_jumps);
    let mut times: Vec<f64> = (0..k).map(|_| rng.random_range(0.0..=1.0)).collect();
    times.sort_by(f64::total_cmp);
    times.dedup();
    let initial: f64 = rng.sample(StandardNormal);
    let jumps: Vec<(f64, f64)> = times.into_iter().filter(|t| *t > 0.0).map(|t| (t, rng.sample(StandardNormal))).collect();
    CadlagPath::new(initial, jumps).expect("sorted distinct jump times")
}

/// Step path on the [`LATTICE`]: up to `max_jumps` jumps at distinct
/// multiples of 1/40 in (0, 1], values multiples of 1/40 in [-1, 1].
pub fn random_lattice_path(rng: &mut SimRng, max_jumps: usize) -> CadlagPath {
    let slots = (1.0 / LATTICE).round() as usize;
    let k = rng.random_range(0..=max_jumps);
    let mut idx = sample(rng, slots, k).into_vec();
    idx.sort_unstable();
    let mut value = || rng.random_range(-(slots as i64)..=slots as i64) as f64 * LATTICE;
    let initial = value();
    let jumps: Vec<(f64, f64)> = idx.into_iter().map(|i| ((i + 1) as f64 * LATTICE, value())).collect();
    CadlagPath::new(initial, jumps).expect("sorted distinct lattice times")
}

/// `x_n = 1/2` on `[1/2 − 1/n, 1/2)`, `1` on `[1/2, 1]`.
pub fn staircase(n: u32) -> CadlagPath {
    let n = f64::from(n);
    CadlagPath::new(0.0, [(0.5 - 1.0 / n, 0.5), (0.5, 1.0)]).expect("valid staircase")
}

pub fn indicator_half() -> CadlagPath {
    CadlagPath::new(0.0, [(0.5, 1.0)]).expect("valid indicator")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StaircaseRow {
    pub n: u32,
    pub m1: f64,
    pub uniform: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSuite {
    pub seed: u64,
    pub tol: f64,
    pub pairs: usize,
    /// Negative distances, `d(x, x) > tol`, or asymmetry beyond `3 tol`.
    pub axiom_violations: usize,
    /// Largest `d(a, c) − d(a, b) − d(b, c)` over random triples.
    pub triangle_max_excess: f64,
    pub triangle_violations: usize,
    pub domination_violations: usize,
    pub l1_violations: usize,
    pub staircase: Vec<StaircaseRow>,
    pub staircase_pass: bool,
    pub oracle_cases: usize,
    pub oracle_max_error: f64,
    pub oracle_pass: bool,
    pub pass: bool,
}

pub const ORACLE_AGREEMENT: f64 = 1e-3;

#[derive(Default)]
struct PairCheck {
    axiom: usize,
    triangle_excess: f64,
    triangle: usize,
    domination: usize,
    l1: usize,
}

fn check_triple(rng: &mut SimRng, tol: f64) -> Result<PairCheck> {
    let a = random_step_path(rng, 5);
    let b = random_step_path(rng, 5);
    let c = random_step_path(rng, 5);
    let ab = m1_distance(&a, &b, tol)?;
    let ba = m1_distance(&b, &a, tol)?;
    let bc = m1_distance(&b, &c, tol)?;
    let ac = m1_distance(&a, &c, tol)?;
    let aa = m1_distance(&a, &a, tol)?;
    let mut out = PairCheck::default();
    if ab < 0.0 || aa > tol || (ab - ba).abs() > 3.0 * tol {
        out.axiom = 1;
    }
    out.triangle_excess = ac - ab - bc;
    out.triangle = usize::from(out.triangle_excess > 3.0 * tol);
    let u = uniform_distance(&a, &b);
    out.domination = usize::from(ab > u + tol);
    out.l1 = usize::from(l1_distance(&a, &b) > u + 1e-12);
    Ok(out)
}

/// Runs the full suite: `pairs` random triples for the axioms and
/// domination, the staircase at n ∈ {4, 8, 16}, and `oracle_cases` lattice
/// pairs with at most three jumps against [`grid_oracle_m1`].
pub fn run_metric_suite(pairs: usize, oracle_cases: usize, tol: f64, seed: u64) -> Result<MetricSuite> {
    let checks: Vec<PairCheck> = (0..pairs as u64)
        .into_par_iter()
        .map(|i| check_triple(&mut domain_stream(seed, domain::METRIC, i), tol))
        .collect::<Result<_>>()?;

    let x = indicator_half();
    let staircase: Vec<StaircaseRow> = [4u32, 8, 16]
        .into_iter()
        .map(|n| {
            let xn = staircase(n);
            Ok(StaircaseRow { n, m1: m1_distance(&xn, &x, tol)?, uniform: uniform_distance(&xn, &x) })
        })
        .collect::<Result<_>>()?;
    let staircase_pass = staircase.iter().all(|r| r.m1 <= 1.0 / f64::from(r.n) + tol && r.uniform == 0.5)
        && staircase.windows(2).all(|w| w[1].m1 <= w[0].m1 + tol);

    let errors: Vec<f64> = (0..oracle_cases as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = domain_stream(seed, domain::METRIC, (1 << 32) | i);
            let a = random_lattice_path(&mut rng, 3);
            let b = random_lattice_path(&mut rng, 3);
            Ok((m1_distance(&a, &b, tol)? - grid_oracle_m1(&a, &b, ORACLE_SPACING)).abs())
        })
        .collect::<Result<_>>()?;
    let oracle_max_error = errors.iter().copied().fold(0.0, f64::max);

    let axiom_violations = checks.iter().map(|c| c.axiom).sum();
    let triangle_violations = checks.iter().map(|c| c.triangle).sum();
    let domination_violations = checks.iter().map(|c| c.domination).sum();
    let l1_violations = checks.iter().map(|c| c.l1).sum();
    let oracle_pass = oracle_max_error <= ORACLE_AGREEMENT;
    let pass = axiom_violations == 0
        && triangle_violations == 0
        && domination_violations == 0
        && l1_violations == 0
        && staircase_pass
        && oracle_pass;
    Ok(MetricSuite {
        seed,
        tol,
        pairs,
        axiom_violations,
        triangle_max_excess: checks.iter().map(|c| c.triangle_excess).fold(f64::NEG_INFINITY, f64::max),
        triangle_violations,
        domination_violations,
        l1_violations,
        staircase,
        staircase_pass,
        oracle_cases,
        oracle_max_error,
        oracle_pass,
        pass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn discrete_frechet_small_cases() {
        let p = [(0.0, 0.0), (1.0, 0.0)];
        assert_eq!(discrete_frechet(&p, &p), 0.0);
        let q = [(0.0, 0.5), (1.0, 0.5)];
        assert_eq!(discrete_frechet(&p, &q), 0.5);
        // Order matters: a reversed curve is far.
        let r = [(1.0, 0.0), (0.0, 0.0)];
        assert_eq!(discrete_frechet(&p, &r), 1.0);
    }

    #[test]
    fn oracle_matches_known_values() {
        let x = indicator_half();
        let shifted = CadlagPath::new(0.0, [(0.6, 1.0)]).unwrap();
        assert!((grid_oracle_m1(&x, &shifted, 0.01) - 0.1).abs() < 1e-12);
        let zero = CadlagPath::constant(0.0);
        assert!((grid_oracle_m1(&x, &zero, ORACLE_SPACING) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn sampled_graph_keeps_vertices() {
        let g = staircase(4).completed_graph();
        let s = sample_graph(&g, ORACLE_SPACING);
        for v in g.points() {
            assert!(s.contains(v));
        }
        assert!(s.windows(2).all(|w| linf(w[0], w[1]) <= ORACLE_SPACING + 1e-12));
    }

    #[test]
    fn hausdorff_of_monotone_pair() {
        let x = indicator_half();
        let y = CadlagPath::new(0.0, [(0.6, 1.0)]).unwrap();
        assert!((graph_hausdorff(&x, &y, 1e-3) - 0.1).abs() < 1e-3);
        assert!((m1_distance(&x, &y, 1e-9).unwrap() - 0.1).abs() < 1e-8);
    }

    #[test]
    fn lattice_paths_stay_on_lattice() {
        let mut rng = domain_stream(3, domain::METRIC, 0);
        for _ in 0..100 {
            let p = random_lattice_path(&mut rng, 3);
            assert!(p.jump_count() <= 3);
            for j in p.jumps() {
                assert!(((j.time / LATTICE) - (j.time / LATTICE).round()).abs() < 1e-9);
                assert!(((j.value / LATTICE) - (j.value / LATTICE).round()).abs() < 1e-9);
            }
        }
    }

    #[test]
    #[ignore = "full-size suite"]
    fn full_suite_passes() {
        let s = run_metric_suite(1000, 500, 1e-6, 1).unwrap();
        assert!(s.pass, "{s:?}");
    }

    #[test]
    fn small_suite_passes() {
        let s = run_metric_suite(50, 10, 1e-6, 11).unwrap();
        assert!(s.pass, "{s:?}");
        assert_eq!(s.staircase.len(), 3);
    }
}
