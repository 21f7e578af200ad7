//! Stationary regularly varying series: i.i.d., finite moving averages,
//! squared GARCH(1,1), stochastic volatility and Gaussian-driven isolated
//! extremes. Each model comes with its normalisation `a_n` and centering
//! `b_n = E[X 1{|X| ≤ a_n}]`.

use std::f64::consts::{PI, SQRT_2};
use std::io::{Read, Write};

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::cadlag::CadlagPath;
use crate::error::{invalid, Error, Result};
use crate::rng::{chunked, domain, domain_stream, open_unit, SimRng, CHUNK};
use crate::stats::{quantile_in_place, Estimate, Moments};

pub const BURN_IN: usize = 1000;
pub const DEFAULT_CENTERING_DRAWS: usize = 1_000_000;
pub const DEFAULT_CALIBRATION_SEED: u64 = 0x00ca_1b8a_7e;
const STATIONARITY_DRAWS: usize = 100_000;

/// Two-sided Pareto law: `P(|Z| > x) = (x/scale)^-alpha` for `x ≥ scale`,
/// positive sign with probability `p`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarginalSpec {
    pub alpha: f64,
    pub p: f64,
    pub scale: f64,
}

impl MarginalSpec {
    pub fn new(alpha: f64, p: f64, scale: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 2.0) {
            return Err(invalid(format!("alpha must lie in (0, 2), got {alpha}")));
        }
        if !(0.0..=1.0).contains(&p) {
            return Err(invalid(format!("p must lie in [0, 1], got {p}")));
        }
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(invalid(format!("scale must be positive, got {scale}")));
        }
        Ok(Self { alpha, p, scale })
    }

    pub fn q(&self) -> f64 {
        1.0 - self.p
    }

    #[inline]
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let r = self.scale * open_unit(rng).powf(-1.0 / self.alpha);
        if rng.random::<f64>() < self.p {
            r
        } else {
            -r
        }
    }

    /// `P(|Z| > x)`.
    pub fn tail(&self, x: f64) -> f64 {
        if x < self.scale {
            1.0
        } else {
            (x / self.scale).powf(-self.alpha)
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        if x < 0.0 {
            self.q() * self.tail(-x)
        } else {
            1.0 - self.p * self.tail(x)
        }
    }

    /// Inverse CDF from the pair `(u, 1 - u)`; passing both keeps precision
    /// in the upper tail.
    pub fn quantile_split(&self, lower: f64, upper: f64) -> f64 {
        let q = self.q();
        if lower < q {
            -self.scale * (lower / q).max(f64::MIN_POSITIVE).powf(-1.0 / self.alpha)
        } else {
            self.scale * (upper / self.p).clamp(f64::MIN_POSITIVE, 1.0).powf(-1.0 / self.alpha)
        }
    }

    pub fn quantile(&self, u: f64) -> f64 {
        self.quantile_split(u, 1.0 - u)
    }

    /// `E[Z 1{|Z| ≤ a}]` in closed form.
    pub fn truncated_mean(&self, a: f64) -> f64 {
        let (al, s) = (self.alpha, self.scale);
        if a < s {
            return 0.0;
        }
        let integral = if (al - 1.0).abs() < 1e-12 {
            s * (a / s).ln()
        } else {
            al * s.powf(al) * (a.powf(1.0 - al) - s.powf(1.0 - al)) / (1.0 - al)
        };
        (self.p - self.q()) * integral
    }
}

/// Stationary series generators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum ModelSpec {
    Iid { marginal: MarginalSpec },
    /// `X_n = Σ c_i Z_{n-i}`; coefficients normalised to `Σ c_i^α = 1`.
    MovingAverage { marginal: MarginalSpec, coefficients: Vec<f64> },
    /// `X_n²` of a GARCH(1,1) with standard normal innovations.
    Garch11Squared { alpha0: f64, alpha1: f64, beta1: f64, tail_index: f64 },
    /// `X_n = exp(h_n) Z_n`, `h` a Gaussian AR(1).
    StochVol { marginal: MarginalSpec, phi: f64, vol_scale: f64 },
    /// `X_n = F^{-1}(Φ(A_n))`, `A` a unit-variance Gaussian AR(1).
    IsolatedExtremes { marginal: MarginalSpec, phi: f64 },
}

impl ModelSpec {
    pub fn iid(marginal: MarginalSpec) -> Self {
        Self::Iid { marginal }
    }

    pub fn moving_average(marginal: MarginalSpec, coefficients: &[f64]) -> Result<Self> {
        let coefficients = normalize_ma(coefficients, marginal.alpha)?;
        Ok(Self::MovingAverage { marginal, coefficients })
    }

    pub fn garch11_squared(alpha0: f64, alpha1: f64, beta1: f64) -> Result<Self> {
        if !(alpha0 > 0.0) || !(alpha1 >= 0.0) || !(beta1 >= 0.0) {
            return Err(invalid("GARCH needs alpha0 > 0 and alpha1, beta1 >= 0"));
        }
        if alpha1 == 0.0 {
            return Err(Error::Unsupported("alpha1 = 0 gives bounded volatility, not a heavy tail".into()));
        }
        let lyapunov = garch_lyapunov(alpha1, beta1, STATIONARITY_DRAWS, DEFAULT_CALIBRATION_SEED);
        if !(lyapunov.value < 0.0) {
            return Err(Error::NotStationary(format!(
                "E ln(alpha1 Z^2 + beta1) = {:.4} (se {:.4}) is not negative",
                lyapunov.value, lyapunov.se
            )));
        }
        let tail_index = garch_tail_index(alpha1, beta1)?;
        Ok(Self::Garch11Squared { alpha0, alpha1, beta1, tail_index })
    }

    pub fn stoch_vol(marginal: MarginalSpec, phi: f64, vol_scale: f64) -> Result<Self> {
        if !(phi > -1.0 && phi < 1.0) {
            return Err(invalid(format!("phi must lie in (-1, 1), got {phi}")));
        }
        if !(vol_scale >= 0.0 && vol_scale.is_finite()) {
            return Err(invalid(format!("vol_scale must be nonnegative, got {vol_scale}")));
        }
        Ok(Self::StochVol { marginal, phi, vol_scale })
    }

    pub fn isolated_extremes(marginal: MarginalSpec, phi: f64) -> Result<Self> {
        if !(phi > -1.0 && phi < 1.0) {
            return Err(invalid(format!("phi must lie in (-1, 1), got {phi}")));
        }
        Ok(Self::IsolatedExtremes { marginal, phi })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Iid { .. } => "iid",
            Self::MovingAverage { .. } => "ma",
            Self::Garch11Squared { .. } => "garch11sq",
            Self::StochVol { .. } => "stochvol",
            Self::IsolatedExtremes { .. } => "isolated",
        }
    }

    /// Tail index of the series.
    pub fn alpha(&self) -> f64 {
        match self {
            Self::Garch11Squared { tail_index, .. } => *tail_index,
            Self::Iid { marginal }
            | Self::MovingAverage { marginal, .. }
            | Self::StochVol { marginal, .. }
            | Self::IsolatedExtremes { marginal, .. } => marginal.alpha,
        }
    }

    /// Tail balance `lim P(X > x) / P(|X| > x)`.
    pub fn p(&self) -> f64 {
        match self {
            Self::Garch11Squared { .. } => 1.0,
            Self::Iid { marginal }
            | Self::MovingAverage { marginal, .. }
            | Self::StochVol { marginal, .. }
            | Self::IsolatedExtremes { marginal, .. } => marginal.p,
        }
    }

    pub fn marginal(&self) -> Option<&MarginalSpec> {
        match self {
            Self::Garch11Squared { .. } => None,
            Self::Iid { marginal }
            | Self::MovingAverage { marginal, .. }
            | Self::StochVol { marginal, .. }
            | Self::IsolatedExtremes { marginal, .. } => Some(marginal),
        }
    }

    fn generate(&self, n: usize, rng: &mut SimRng) -> Vec<f64> {
        match self {
            Self::Iid { marginal } => (0..n).map(|_| marginal.sample(rng)).collect(),
            Self::MovingAverage { marginal, coefficients } => {
                let m = coefficients.len() - 1;
                let z: Vec<f64> = (0..n + m).map(|_| marginal.sample(rng)).collect();
                (0..n)
                    .map(|t| coefficients.iter().enumerate().map(|(i, c)| c * z[t + m - i]).sum())
                    .collect()
            }
            Self::Garch11Squared { alpha0, alpha1, beta1, .. } => {
                let persistence = alpha1 + beta1;
                let mut sigma2 = if persistence < 1.0 { alpha0 / (1.0 - persistence) } else { *alpha0 };
                let mut out = Vec::with_capacity(n);
                for t in 0..BURN_IN + n {
                    let z: f64 = rng.sample(StandardNormal);
                    let x2 = sigma2 * z * z;
                    if t >= BURN_IN {
                        out.push(x2);
                    }
                    sigma2 = alpha0 + alpha1 * x2 + beta1 * sigma2;
                }
                out
            }
            Self::StochVol { marginal, phi, vol_scale } => {
                let mut h = 0.0;
                let mut out = Vec::with_capacity(n);
                for t in 0..BURN_IN + n {
                    let e: f64 = rng.sample(StandardNormal);
                    h = phi * h + vol_scale * e;
                    let z = marginal.sample(rng);
                    if t >= BURN_IN {
                        out.push(h.exp() * z);
                    }
                }
                out
            }
            Self::IsolatedExtremes { marginal, phi } => {
                let innov = (1.0 - phi * phi).sqrt();
                let mut a: f64 = rng.sample(StandardNormal);
                let mut out = Vec::with_capacity(n);
                for t in 0..n {
                    if t > 0 {
                        let e: f64 = rng.sample(StandardNormal);
                        a = phi * a + innov * e;
                    }
                    let (lower, upper) = normal_cdf_split(a);
                    out.push(marginal.quantile_split(lower, upper));
                }
                out
            }
        }
    }

    /// One draw from the stationary marginal law of `X`.
    fn marginal_draw(&self, rng: &mut SimRng) -> f64 {
        match self {
            Self::Iid { marginal } | Self::IsolatedExtremes { marginal, .. } => marginal.sample(rng),
            Self::MovingAverage { marginal, coefficients } => {
                coefficients.iter().map(|c| c * marginal.sample(rng)).sum()
            }
            Self::StochVol { marginal, phi, vol_scale } => {
                let sd = vol_scale / (1.0 - phi * phi).sqrt();
                let e: f64 = rng.sample(StandardNormal);
                (sd * e).exp() * marginal.sample(rng)
            }
            Self::Garch11Squared { .. } => unreachable!("GARCH marginals come from series chunks"),
        }
    }

    /// `count` draws of `X` in chunk order. GARCH uses one burnt-in series
    /// per chunk; the other models draw independent copies of `X_0`.
    fn stationary_draws(&self, count: usize, seed: u64, dom: u64) -> Vec<Vec<f64>> {
        chunked(count, CHUNK, seed, dom, |rng, len| match self {
            Self::Garch11Squared { .. } => self.generate(len, rng),
            _ => (0..len).map(|_| self.marginal_draw(rng)).collect(),
        })
    }
}

fn normalize_ma(coefficients: &[f64], alpha: f64) -> Result<Vec<f64>> {
    if coefficients.is_empty() {
        return Err(invalid("moving average needs at least one coefficient"));
    }
    if coefficients.iter().any(|c| !(c.is_finite() && *c >= 0.0)) {
        return Err(invalid("moving average coefficients must be finite and nonnegative"));
    }
    if coefficients[0] == 0.0 || *coefficients.last().unwrap() == 0.0 {
        return Err(invalid("first and last moving average coefficients must be positive"));
    }
    let norm: f64 = coefficients.iter().map(|c| c.powf(alpha)).sum::<f64>().powf(1.0 / alpha);
    Ok(coefficients.iter().map(|c| c / norm).collect())
}

/// `(Φ(a), 1 - Φ(a))`, each accurate in its own tail.
pub fn normal_cdf_split(a: f64) -> (f64, f64) {
    if a < 0.0 {
        let lower = 0.5 * erfc(-a / SQRT_2);
        (lower, 1.0 - lower)
    } else {
        let upper = 0.5 * erfc(a / SQRT_2);
        (1.0 - upper, upper)
    }
}

/// Monte Carlo estimate of `E ln(alpha1 Z² + beta1)`.
pub fn garch_lyapunov(alpha1: f64, beta1: f64, draws: usize, seed: u64) -> Estimate {
    let parts = chunked(draws, CHUNK, seed, domain::STATIONARITY, |rng, len| {
        let mut m = Moments::default();
        for _ in 0..len {
            let z: f64 = rng.sample(StandardNormal);
            m.push((alpha1 * z * z + beta1).ln());
        }
        m
    });
    Estimate::from_moments(&Moments::merge_all(&parts), seed, "monte_carlo")
}

/// `E[(alpha1 Z² + beta1)^kappa]` for standard normal `Z`, by Simpson's rule
/// after the substitution `z = s²`.
pub fn garch_moment(alpha1: f64, beta1: f64, kappa: f64) -> f64 {
    const STEPS: usize = 20_000;
    let upper = 40f64.sqrt();
    let h = upper / STEPS as f64;
    let f = |s: f64| {
        let z = s * s;
        (alpha1 * z * z + beta1).powf(kappa) * (-0.5 * z * z).exp() * 2.0 * s
    };
    let mut acc = f(0.0) + f(upper);
    for i in 1..STEPS {
        acc += f(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    2.0 * acc * h / 3.0 / (2.0 * PI).sqrt()
}

/// Positive root of `E[(alpha1 Z² + beta1)^kappa] = 1`, required in (0, 2).
pub fn garch_tail_index(alpha1: f64, beta1: f64) -> Result<f64> {
    let g = |k: f64| garch_moment(alpha1, beta1, k) - 1.0;
    if g(2.0) < 0.0 {
        return Err(Error::Unsupported(format!(
            "tail index of the squared GARCH is at least 2 (alpha1 = {alpha1}, beta1 = {beta1})"
        )));
    }
    let mut lo = 0.01;
    while g(lo) >= 0.0 {
        lo /= 2.0;
        if lo < 1e-8 {
            return Err(Error::NotStationary("no positive root of the tail equation".into()));
        }
    }
    let mut hi = 2.0;
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if g(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Length-`n` sample on substream `(seed, SERIES, 0)`.
pub fn simulate_series(spec: &ModelSpec, n: usize, seed: u64) -> Result<Vec<f64>> {
    simulate_replicate(spec, n, seed, 0)
}

/// Replicate `r` of an ensemble: substream `(seed, SERIES, r)`.
pub fn simulate_replicate(spec: &ModelSpec, n: usize, seed: u64, replicate: u64) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(invalid("series length must be at least 1"));
    }
    let mut rng = domain_stream(seed, domain::SERIES, replicate);
    Ok(spec.generate(n, &mut rng))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormalizationMethod {
    Analytic,
    EmpiricalQuantile,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub value: f64,
    pub method: NormalizationMethod,
}

/// `a_n` with `n P(|X| > a_n) = 1`: analytic for Pareto-type marginals,
/// otherwise the empirical `(1 - 1/n)` quantile of `|X|`.
pub fn normalizing_sequence(spec: &ModelSpec, n: usize) -> Result<Normalization> {
    let len = (100 * n).max(1_000_000);
    normalizing_sequence_with(spec, n, len, DEFAULT_CALIBRATION_SEED)
}

pub fn normalizing_sequence_with(spec: &ModelSpec, n: usize, calibration_len: usize, seed: u64) -> Result<Normalization> {
    if n == 0 {
        return Err(invalid("n must be at least 1"));
    }
    match spec {
        ModelSpec::Iid { marginal } | ModelSpec::MovingAverage { marginal, .. } | ModelSpec::IsolatedExtremes { marginal, .. } => {
            Ok(Normalization { value: marginal.scale * (n as f64).powf(1.0 / marginal.alpha), method: NormalizationMethod::Analytic })
        }
        _ => {
            if calibration_len < n {
                return Err(invalid("calibration run shorter than n"));
            }
            let mut abs: Vec<f64> =
                spec.stationary_draws(calibration_len, seed, domain::CALIBRATION).concat().into_iter().map(f64::abs).collect();
            let value = quantile_in_place(&mut abs, 1.0 - 1.0 / n as f64);
            Ok(Normalization { value, method: NormalizationMethod::EmpiricalQuantile })
        }
    }
}

/// `b_n = E[X 1{|X| ≤ a_n}]`: closed form for Pareto marginals, Monte Carlo
/// with `DEFAULT_CENTERING_DRAWS` draws otherwise.
pub fn centering_sequence(spec: &ModelSpec, a_n: f64) -> Result<Estimate> {
    centering_sequence_with(spec, a_n, DEFAULT_CENTERING_DRAWS, DEFAULT_CALIBRATION_SEED)
}

pub fn centering_sequence_with(spec: &ModelSpec, a_n: f64, draws: usize, seed: u64) -> Result<Estimate> {
    Ok(truncated_means(spec, &[a_n], draws, seed)?.remove(0))
}

/// `E[X 1{|X| ≤ level}]` for several levels from one set of draws.
pub fn truncated_means(spec: &ModelSpec, levels: &[f64], draws: usize, seed: u64) -> Result<Vec<Estimate>> {
    if levels.iter().any(|l| !(*l > 0.0)) {
        return Err(invalid("truncation levels must be positive"));
    }
    match spec {
        ModelSpec::Iid { marginal } | ModelSpec::IsolatedExtremes { marginal, .. } => {
            Ok(levels.iter().map(|l| Estimate::exact(marginal.truncated_mean(*l), "closed_form")).collect())
        }
        _ => {
            if draws < 2 {
                return Err(invalid("centering needs at least 2 draws"));
            }
            let chunks = spec.stationary_draws(draws, seed, domain::CENTERING);
            let garch = matches!(spec, ModelSpec::Garch11Squared { .. });
            Ok(levels
                .iter()
                .map(|&level| {
                    let truncate = |x: &f64| if x.abs() <= level { *x } else { 0.0 };
                    // Chunk means are independent even for GARCH, where each
                    // chunk is its own burnt-in path: batch means.
                    let (value, se) = if garch {
                        let means: Vec<f64> =
                            chunks.iter().map(|c| c.iter().map(truncate).sum::<f64>() / c.len() as f64).collect();
                        let weights: Vec<f64> = chunks.iter().map(|c| c.len() as f64).collect();
                        batch_mean(&means, &weights)
                    } else {
                        let parts: Vec<Moments> = chunks
                            .iter()
                            .map(|c| {
                                let mut m = Moments::default();
                                c.iter().for_each(|x| m.push(truncate(x)));
                                m
                            })
                            .collect();
                        let m = Moments::merge_all(&parts);
                        (m.mean(), m.se())
                    };
                    Estimate::monte_carlo(value, se, draws as u64, seed, "monte_carlo")
                })
                .collect())
        }
    }
}

fn batch_mean(means: &[f64], weights: &[f64]) -> (f64, f64) {
    let total: f64 = weights.iter().sum();
    let mean = means.iter().zip(weights).map(|(m, w)| m * w).sum::<f64>() / total;
    let k = means.len();
    if k < 2 {
        return (mean, f64::NAN);
    }
    let var = means.iter().zip(weights).map(|(m, w)| w * (m - mean).powi(2)).sum::<f64>() / total;
    (mean, (var / (k - 1) as f64).sqrt())
}

/// `V_n(t) = (S_⌊nt⌋ − ⌊nt⌋ b_n) / a_n` as a step path with a step at each
/// `k/n`.
pub fn build_partial_sum_path(series: &[f64], a_n: f64, b_n: f64) -> Result<CadlagPath> {
    if !(a_n > 0.0) {
        return Err(invalid(format!("a_n must be positive, got {a_n}")));
    }
    let n = series.len() as f64;
    let mut s = 0.0;
    let values: Vec<(f64, f64)> = series
        .iter()
        .enumerate()
        .map(|(k, x)| {
            s += x;
            let k1 = (k + 1) as f64;
            (k1 / n, (s - k1 * b_n) / a_n)
        })
        .collect();
    CadlagPath::new(0.0, values)
}

/// `V_n(1) = (S_n − n b_n) / a_n` by a direct sequential sum.
pub fn terminal_partial_sum(series: &[f64], a_n: f64, b_n: f64) -> f64 {
    let s: f64 = series.iter().fold(0.0, |acc, x| acc + x);
    (s - series.len() as f64 * b_n) / a_n
}

/// `V_n` evaluated at each of `times` without building the path.
pub fn partial_sums_at(series: &[f64], a_n: f64, b_n: f64, times: &[f64]) -> Vec<f64> {
    let n = series.len();
    let mut prefix = Vec::with_capacity(n + 1);
    let mut s = 0.0;
    prefix.push(0.0);
    for x in series {
        s += x;
        prefix.push(s);
    }
    times
        .iter()
        .map(|t| {
            let k = ((t * n as f64).floor() as usize).min(n);
            (prefix[k] - k as f64 * b_n) / a_n
        })
        .collect()
}

pub fn write_series_csv<W: Write>(series: &[f64], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["value"])?;
    for x in series {
        w.serialize(x)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads the `value` column of a CSV file.
pub fn read_series_csv<R: Read>(reader: R) -> Result<Vec<f64>> {
    let mut rdr = csv::Reader::from_reader(reader);
    let col = rdr
        .headers()?
        .iter()
        .position(|h| h.trim() == "value")
        .ok_or_else(|| Error::InvalidParameter("CSV has no `value` column".into()))?;
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let field = rec.get(col).unwrap_or("").trim();
        out.push(field.parse::<f64>().map_err(|e| invalid(format!("bad value {field:?}: {e}")))?);
    }
    Ok(out)
}
