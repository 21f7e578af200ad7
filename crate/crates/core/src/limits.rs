//! Limit objects: α-stable Lévy paths from a triple by compound Poisson
//! truncation, and the limiting cluster point process of exceedances.

use std::io::{Read, Write};

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cadlag::CadlagPath;
use crate::error::{invalid, Result};
use crate::pointproc::{Atom, PointMeasure};
use crate::rng::{domain, domain_stream, open_unit, SimRng};
use crate::tailproc::{sample_cluster_process, LevyTriple, TailSampler, DEFAULT_REJECTION_CAP};

pub const DEFAULT_GRID: usize = 1000;

/// `1e-3` for `α < 1`, `1e-2` otherwise.
pub fn default_u_trunc(alpha: f64) -> f64 {
    if alpha < 1.0 {
        1e-3
    } else {
        1e-2
    }
}

/// Compound Poisson approximation of the Lévy process with triple
/// `(0, ν, b)`: jumps with `|J| > u_trunc` are simulated, the mean of the
/// smaller jumps is folded into the drift `b − ∫_{u<|x|≤1} x ν(dx)` and
/// their centred remainder is dropped.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LimitSimulator {
    triple: LevyTriple,
    u_trunc: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruncationReport {
    pub u_trunc: f64,
    pub jump_rate: f64,
    pub drift: f64,
    /// Standard deviation of the dropped compensated small jumps at `t = 1`.
    pub residual_sd: f64,
    /// `2 ∫_{|x|≤u} |x| ν(dx)`, finite for `α < 1`.
    pub residual_l1_bound: Option<f64>,
}

impl LimitSimulator {
    pub fn new(triple: LevyTriple, u_trunc: f64) -> Result<Self> {
        let triple = LevyTriple::new(triple.alpha, triple.c_plus, triple.c_minus, triple.b)?;
        if !(u_trunc > 0.0 && u_trunc <= 1.0) {
            return Err(invalid(format!("u_trunc must lie in (0, 1], got {u_trunc}")));
        }
        Ok(Self { triple, u_trunc })
    }

    pub fn triple(&self) -> &LevyTriple {
        &self.triple
    }

    pub fn jump_rate(&self) -> f64 {
        self.triple.tail_mass(self.u_trunc)
    }

    pub fn drift(&self) -> f64 {
        self.triple.b - self.triple.truncated_first_moment(self.u_trunc)
    }

    pub fn truncation_report(&self) -> TruncationReport {
        let t = &self.triple;
        let residual_l1_bound = (t.alpha < 1.0)
            .then(|| 2.0 * (t.c_plus + t.c_minus) * t.alpha / (1.0 - t.alpha) * self.u_trunc.powf(1.0 - t.alpha));
        TruncationReport {
            u_trunc: self.u_trunc,
            jump_rate: self.jump_rate(),
            drift: self.drift(),
            residual_sd: t.small_jump_variance(self.u_trunc).sqrt(),
            residual_l1_bound,
        }
    }

    /// Jumps on `[0, 1]` as `(time, size)` in draw order.
    pub fn sample_jumps(&self, rng: &mut SimRng) -> Vec<(f64, f64)> {
        let rate = self.jump_rate();
        if rate <= 0.0 {
            return Vec::new();
        }
        let count = Poisson::new(rate).expect("positive finite rate").sample(rng) as usize;
        let t = &self.triple;
        let p_plus = t.c_plus / (t.c_plus + t.c_minus);
        (0..count)
            .map(|_| {
                let time = open_unit(rng);
                let size = self.u_trunc * open_unit(rng).powf(-1.0 / t.alpha);
                (time, if rng.random::<f64>() < p_plus { size } else { -size })
            })
            .collect()
    }

    pub fn sample_marginal(&self, rng: &mut SimRng) -> f64 {
        self.drift() + self.sample_jumps(rng).iter().map(|j| j.1).sum::<f64>()
    }

    /// Path with the drift laid out as a staircase on `grid` equal steps.
    pub fn sample_path(&self, rng: &mut SimRng, grid: usize) -> Result<CadlagPath> {
        if grid == 0 {
            return Err(invalid("drift grid must have at least one step"));
        }
        let step = self.drift() / grid as f64;
        let mut events = self.sample_jumps(rng);
        if step != 0.0 {
            events.extend((1..=grid).map(|k| (k as f64 / grid as f64, step)));
        }
        events.sort_by(|a, b| a.0.total_cmp(&b.0));
        CadlagPath::from_increments(0.0, events)
    }
}

/// One draw of `V(1)` on substream `(seed, LIMIT, 0)`.
pub fn simulate_limit_marginal(triple: &LevyTriple, u_trunc: f64, seed: u64) -> Result<f64> {
    let sim = LimitSimulator::new(*triple, u_trunc)?;
    Ok(sim.sample_marginal(&mut domain_stream(seed, domain::LIMIT, 0)))
}

/// `count` draws of `V(1)`; draw `r` uses substream `(seed, LIMIT, r)`.
pub fn simulate_limit_marginals(triple: &LevyTriple, u_trunc: f64, count: usize, seed: u64) -> Result<Vec<f64>> {
    let sim = LimitSimulator::new(*triple, u_trunc)?;
    Ok((0..count as u64)
        .into_par_iter()
        .map(|r| sim.sample_marginal(&mut domain_stream(seed, domain::LIMIT, r)))
        .collect())
}

/// One path on substream `(seed, LIMIT, 0)`.
pub fn simulate_limit_path(triple: &LevyTriple, u_trunc: f64, grid: usize, seed: u64) -> Result<CadlagPath> {
    simulate_limit_path_replicate(triple, u_trunc, grid, seed, 0)
}

pub fn simulate_limit_path_replicate(triple: &LevyTriple, u_trunc: f64, grid: usize, seed: u64, replicate: u64) -> Result<CadlagPath> {
    let sim = LimitSimulator::new(*triple, u_trunc)?;
    sim.sample_path(&mut domain_stream(seed, domain::LIMIT, replicate), grid)
}

/// Poisson(`θ u^{-α}`) cluster times, uniform on `[0, 1]`, each carrying an
/// independent cluster `{u Z_j}`. With `restrict`, only atoms `|u Z| > u`
/// are kept.
pub fn simulate_cluster_limit_measure<S: TailSampler + ?Sized>(
    theta: f64,
    alpha: f64,
    u: f64,
    sampler: &S,
    seed: u64,
    restrict: bool,
) -> Result<PointMeasure> {
    if !(theta > 0.0 && theta <= 1.0) {
        return Err(invalid(format!("theta must lie in (0, 1], got {theta}")));
    }
    if !(u > 0.0 && alpha > 0.0) {
        return Err(invalid("u and alpha must be positive"));
    }
    let mut rng = domain_stream(seed, domain::CLUSTER, 0);
    let count = Poisson::new(theta * u.powf(-alpha)).map_err(|e| invalid(e.to_string()))?.sample(&mut rng) as usize;
    let mut atoms = Vec::new();
    for _ in 0..count {
        let time = rng.random::<f64>();
        let cluster = sample_cluster_process(sampler, &mut rng, DEFAULT_REJECTION_CAP)?;
        atoms.extend(cluster.marks.iter().map(|z| Atom { time, mark: u * z }).filter(|a| !restrict || a.mark.abs() > u));
    }
    PointMeasure::new(atoms)
}

/// One batch row: replicate index and sampled value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BatchRow {
    pub replicate: u64,
    pub value: f64,
}

/// Writes a sample batch as CSV with columns `replicate,value`.
pub fn write_batch_csv<W: Write>(values: &[f64], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for (i, &value) in values.iter().enumerate() {
        w.serialize(BatchRow { replicate: i as u64, value })?;
    }
    if values.is_empty() {
        w.write_record(["replicate", "value"])?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a `replicate,value` batch, returning values ordered by replicate.
pub fn read_batch_csv<R: Read>(reader: R) -> Result<Vec<f64>> {
    let mut rows: Vec<BatchRow> = csv::Reader::from_reader(reader).deserialize().collect::<std::result::Result<_, _>>()?;
    rows.sort_by_key(|r| r.replicate);
    Ok(rows.into_iter().map(|r| r.value).collect())
}

/// Writes a sample batch as a JSON array of `{replicate, value}` objects.
pub fn batch_to_json(values: &[f64]) -> Result<String> {
    let rows: Vec<BatchRow> = values.iter().enumerate().map(|(i, &value)| BatchRow { replicate: i as u64, value }).collect();
    Ok(serde_json::to_string_pretty(&rows)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn batch_csv_round_trip() {
        let values = [0.5, -1.25, 3.0];
        let mut buf = Vec::new();
        write_batch_csv(&values, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("replicate,value\n0,0.5\n"));
        assert_eq!(read_batch_csv(buf.as_slice()).unwrap(), values);
        let mut empty = Vec::new();
        write_batch_csv(&[], &mut empty).unwrap();
        assert_eq!(String::from_utf8(empty).unwrap(), "replicate,value\n");
        assert!(batch_to_json(&values).unwrap().contains("\"replicate\": 2"));
    }
    use crate::harness::ks_two_sample;
    use crate::pointproc::summation_functional;
    use crate::stats::mean_se;
    use crate::tailproc::MaTailSampler;

    #[test]
    fn drift_only_triple() {
        let t = LevyTriple::new(0.7, 0.0, 0.0, 1.5).unwrap();
        assert_eq!(simulate_limit_marginal(&t, 1e-3, 1).unwrap(), 1.5);
        let path = simulate_limit_path(&LevyTriple::new(1.2, 0.0, 0.0, 1.0).unwrap(), 1e-2, 1000, 1).unwrap();
        let grid_err = (0..=997).map(|i| i as f64 / 997.0).map(|t| (path.eval(t) - t).abs()).fold(0.0, f64::max);
        assert!(grid_err <= 1e-3 + 1e-12, "{grid_err}");
        assert_eq!(path.eval(0.0), 0.0);
    }

    #[test]
    fn validation() {
        let t = LevyTriple::new(0.7, 1.0, 0.0, 0.0).unwrap();
        assert!(LimitSimulator::new(t, 0.0).is_err());
        assert!(LimitSimulator::new(t, 1.5).is_err());
        let bad = LevyTriple { alpha: 2.5, ..t };
        assert!(LimitSimulator::new(bad, 0.1).is_err());
    }

    #[test]
    fn symmetric_mean_near_zero() {
        let t = LevyTriple::new(1.7, 0.5, 0.5, 0.0).unwrap();
        let xs = simulate_limit_marginals(&t, 1e-2, 100_000, 3).unwrap();
        let (m, se) = mean_se(&xs);
        assert!(m.abs() < 3.0 * se, "{m} {se}");
    }

    #[test]
    fn iid_triple_tail() {
        let t = LevyTriple::new(0.8, 1.0, 0.0, 0.0).unwrap();
        let xs = simulate_limit_marginals(&t, 1e-3, 100_000, 4).unwrap();
        for x in [2.0f64, 5.0] {
            let emp = xs.iter().filter(|v| **v > x).count() as f64 / xs.len() as f64;
            let approx = x.powf(-0.8);
            assert!((emp / approx - 1.0).abs() < 0.15, "x={x}: {emp} vs {approx}");
        }
    }

    #[test]
    fn path_terminal_matches_marginal_law() {
        let t = LevyTriple::new(0.6, 0.8, 0.2, -0.3).unwrap();
        let ends: Vec<f64> = (0..2000).map(|r| simulate_limit_path_replicate(&t, 1e-3, 100, 5, r).unwrap().terminal_value()).collect();
        let direct = simulate_limit_marginals(&t, 1e-3, 2000, 6).unwrap();
        assert!(ks_two_sample(&ends, &direct).unwrap().p_value > 0.01);
    }

    #[test]
    fn symmetric_increments_identically_distributed() {
        let t = LevyTriple::new(1.5, 1.0, 1.0, 0.0).unwrap();
        let (mut first, mut second) = (Vec::new(), Vec::new());
        for r in 0..2000 {
            let p = simulate_limit_path_replicate(&t, 1e-2, 100, 7, r).unwrap();
            first.push(p.eval(0.5));
            second.push(p.terminal_value() - p.eval(0.5));
        }
        assert!(ks_two_sample(&first, &second).unwrap().p_value > 0.01);
    }

    #[test]
    fn truncation_report_fields() {
        let t = LevyTriple::new(0.5, 1.0, 0.0, 0.0).unwrap();
        let r = LimitSimulator::new(t, 1e-2).unwrap().truncation_report();
        assert!((r.jump_rate - 10.0).abs() < 1e-9);
        assert!((r.drift + 0.9 * 1.0 / 0.5 * 0.5).abs() < 1e-9);
        assert!(r.residual_l1_bound.unwrap() > 0.0);
        let t = LevyTriple::new(1.5, 1.0, 0.0, 0.0).unwrap();
        assert!(LimitSimulator::new(t, 1e-2).unwrap().truncation_report().residual_l1_bound.is_none());
    }

    #[test]
    fn cluster_measure_counts() {
        let iid = MaTailSampler::iid(1.0, 1.0).unwrap();
        let counts: Vec<f64> =
            (0..4000).map(|s| simulate_cluster_limit_measure(1.0, 1.0, 1.0, &iid, s, true).unwrap().len() as f64).collect();
        let (m, se) = mean_se(&counts);
        assert!((m - 1.0).abs() < 4.0 * se, "{m}");
        let ma = MaTailSampler::new(&[0.5, 0.5], 1.0, 1.0, (1, 1)).unwrap();
        let mut times = Vec::new();
        for s in 0..4000 {
            let m = simulate_cluster_limit_measure(0.5, 1.0, 1.0, &ma, s, false).unwrap();
            let mut t: Vec<f64> = m.atoms().iter().map(|a| a.time).collect();
            t.dedup();
            times.push(t.len() as f64);
            let path = summation_functional(&m, 1.0).unwrap();
            assert!(path.jump_count() <= m.len());
        }
        let (m, se) = mean_se(&times);
        assert!((m - 0.5).abs() < 4.0 * se, "{m}");
        assert!(simulate_cluster_limit_measure(0.0, 1.0, 1.0, &iid, 0, true).is_err());
    }
}
