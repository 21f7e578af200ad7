//! Summation, moments, quantiles and Monte Carlo estimates.

use serde::{Deserialize, Serialize};

/// Pairwise summation; error grows like `log n` instead of `n`.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    const BASE: usize = 128;
    if xs.len() <= BASE {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    pairwise_sum(xs) / xs.len() as f64
}

/// Sample mean and its standard error.
pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    let m = mean(xs);
    if n < 2 {
        return (m, f64::NAN);
    }
    let dev: Vec<f64> = xs.iter().map(|x| (x - m) * (x - m)).collect();
    let var = pairwise_sum(&dev) / (n - 1) as f64;
    (m, (var / n as f64).sqrt())
}

/// Running count, sum and sum of squares; merges across chunks.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Moments {
    pub count: u64,
    pub sum: f64,
    pub sum_sq: f64,
}

impl Moments {
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        self.sum += x;
        self.sum_sq += x * x;
    }

    pub fn merge(mut self, other: Moments) -> Moments {
        self.count += other.count;
        self.sum += other.sum;
        self.sum_sq += other.sum_sq;
        self
    }

    pub fn mean(&self) -> f64 {
        self.sum / self.count as f64
    }

    pub fn se(&self) -> f64 {
        if self.count < 2 {
            return f64::NAN;
        }
        let n = self.count as f64;
        let m = self.mean();
        let var = ((self.sum_sq - n * m * m) / (n - 1.0)).max(0.0);
        (var / n).sqrt()
    }

    /// Merges a list of per-chunk moments in order, pairwise.
    pub fn merge_all(parts: &[Moments]) -> Moments {
        match parts.len() {
            0 => Moments::default(),
            1 => parts[0],
            n => Self::merge_all(&parts[..n / 2]).merge(Self::merge_all(&parts[n / 2..])),
        }
    }
}

/// A value with its Monte Carlo standard error and provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub se: f64,
    pub reps: u64,
    pub seed: Option<u64>,
    pub method: String,
}

impl Estimate {
    pub fn exact(value: f64, method: impl Into<String>) -> Self {
        Self { value, se: 0.0, reps: 0, seed: None, method: method.into() }
    }

    pub fn monte_carlo(value: f64, se: f64, reps: u64, seed: u64, method: impl Into<String>) -> Self {
        Self { value, se, reps, seed: Some(seed), method: method.into() }
    }

    pub fn from_moments(m: &Moments, seed: u64, method: impl Into<String>) -> Self {
        Self::monte_carlo(m.mean(), m.se(), m.count, seed, method)
    }

    /// `|value - target| <= k * se`, with a floor for exact values.
    pub fn within(&self, target: f64, k: f64) -> bool {
        (self.value - target).abs() <= k * self.se + 1e-12 * target.abs().max(1.0)
    }
}

/// Wilson score interval for `k` successes in `n` trials.
pub fn wilson_interval(k: u64, n: u64, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let n = n as f64;
    let p = k as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

/// Empirical quantile: the smallest order statistic with ECDF `>= q`.
pub fn quantile(xs: &[f64], q: f64) -> f64 {
    let mut v = xs.to_vec();
    quantile_in_place(&mut v, q)
}

pub fn quantile_in_place(xs: &mut [f64], q: f64) -> f64 {
    assert!(!xs.is_empty(), "quantile of empty sample");
    let n = xs.len();
    let k = ((q * n as f64).ceil() as usize).clamp(1, n) - 1;
    *xs.select_nth_unstable_by(k, f64::total_cmp).1
}

pub fn median(xs: &[f64]) -> f64 {
    quantile(xs, 0.5)
}

/// Hill estimator of the tail index from the `k` largest values of `|x|`.
pub fn hill_tail_index(xs: &[f64], k: usize) -> f64 {
    let mut a: Vec<f64> = xs.iter().map(|x| x.abs()).filter(|x| *x > 0.0).collect();
    assert!(k >= 1 && k < a.len(), "hill estimator needs 1 <= k < sample size");
    a.sort_by(|x, y| y.total_cmp(x));
    let base = a[k].ln();
    let s: f64 = a[..k].iter().map(|x| x.ln() - base).sum();
    k as f64 / s
}
