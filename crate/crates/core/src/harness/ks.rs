//! Two-sample Kolmogorov–Smirnov test.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MIN_KS_SAMPLE: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
}

/// Classical two-sample statistic `sup |F_a − F_b|` with the asymptotic
/// Kolmogorov p-value at `λ = (√m + 0.12 + 0.11/√m) D`, `m = n₁n₂/(n₁+n₂)`.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<KsResult> {
    for s in [a, b] {
        if s.len() < MIN_KS_SAMPLE {
            return Err(Error::SampleTooSmall { got: s.len(), need: MIN_KS_SAMPLE });
        }
        if s.iter().any(|x| x.is_nan()) {
            return Err(Error::InvalidParameter("KS sample contains NaN".into()));
        }
    }
    let mut x = a.to_vec();
    let mut y = b.to_vec();
    x.sort_by(f64::total_cmp);
    y.sort_by(f64::total_cmp);
    let (n1, n2) = (x.len() as f64, y.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < x.len() && j < y.len() {
        let v = x[i].min(y[j]);
        while i < x.len() && x[i] <= v {
            i += 1;
        }
        while j < y.len() && y[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / n1 - j as f64 / n2).abs());
    }
    let m = n1 * n2 / (n1 + n2);
    let lambda = (m.sqrt() + 0.12 + 0.11 / m.sqrt()) * d;
    Ok(KsResult { statistic: d, p_value: kolmogorov_q(lambda) })
}

/// `Q(λ) = 2 Σ_{k≥1} (−1)^{k−1} exp(−2k²λ²)`.
pub fn kolmogorov_q(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for k in 1..=200 {
        let term = (-2.0 * (k * k) as f64 * lambda * lambda).exp();
        sum += sign * term;
        if term < 1e-16 * sum.abs() {
            break;
        }
        sign = -sign;
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::substream;
    use rand::Rng;

    #[test]
    fn identical_samples() {
        let a: Vec<f64> = (0..100).map(|i| i as f64).collect();
        let r = ks_two_sample(&a, &a).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert_eq!(r.p_value, 1.0);
    }

    #[test]
    fn shifted_uniforms_separate() {
        let mut rng = substream(1, 0);
        let a: Vec<f64> = (0..10_000).map(|_| rng.random()).collect();
        let b: Vec<f64> = a.iter().map(|x| x + 0.5).collect();
        assert!(ks_two_sample(&a, &b).unwrap().p_value < 1e-6);
    }

    #[test]
    fn level_under_null() {
        let mut passes = 0;
        for t in 0..100 {
            let mut rng = substream(2, t);
            let a: Vec<f64> = (0..1000).map(|_| rng.random()).collect();
            let b: Vec<f64> = (0..1000).map(|_| rng.random()).collect();
            passes += usize::from(ks_two_sample(&a, &b).unwrap().p_value > 0.01);
        }
        assert!(passes >= 98, "{passes}");
    }

    #[test]
    fn undersized_and_known_values() {
        assert!(ks_two_sample(&[0.0; 49], &[0.0; 100]).is_err());
        // Reference values of the Kolmogorov distribution.
        assert!((kolmogorov_q(1.0) - 0.269_999_671_677_3).abs() < 1e-9);
        assert!((kolmogorov_q(1.36) - 0.049_4).abs() < 1e-3);
    }

    #[test]
    fn ties_are_handled() {
        let a = vec![1.0; 60];
        let mut b = vec![1.0; 30];
        b.extend(vec![2.0; 30]);
        assert!((ks_two_sample(&a, &b).unwrap().statistic - 0.5).abs() < 1e-12);
    }
}
