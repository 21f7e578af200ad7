//! Tail and spectral processes, the extremal index, cluster sampling and
//! the Lévy triple `(0, ν, b)` of the stable limit.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use crate::error::{invalid, Error, Result};
use crate::models::{garch_moment, garch_tail_index, MarginalSpec, ModelSpec};
use crate::rng::{chunked, domain, domain_stream, open_unit, SimRng, CHUNK};
use crate::stats::{Estimate, Moments};

pub const DEFAULT_REJECTION_CAP: u64 = 1_000_000;
pub const MIN_TAIL_REPS: usize = 100;

/// Window `Y_i`, `first_lag ≤ i < first_lag + len`, of a tail process.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailWindow {
    pub first_lag: i64,
    pub values: Vec<f64>,
}

impl TailWindow {
    pub fn last_lag(&self) -> i64 {
        self.first_lag + self.values.len() as i64 - 1
    }

    /// `Y_lag`, zero outside the window.
    pub fn y(&self, lag: i64) -> f64 {
        let idx = lag - self.first_lag;
        if idx < 0 {
            return 0.0;
        }
        self.values.get(idx as usize).copied().unwrap_or(0.0)
    }

    pub fn y0(&self) -> f64 {
        self.y(0)
    }

    /// Spectral value `Θ_lag = Y_lag / |Y_0|`.
    pub fn theta(&self, lag: i64) -> f64 {
        self.y(lag) / self.y0().abs()
    }

    fn zero_index(&self) -> usize {
        (-self.first_lag) as usize
    }

    pub fn backward(&self) -> &[f64] {
        &self.values[..self.zero_index()]
    }

    pub fn forward_from_zero(&self) -> &[f64] {
        &self.values[self.zero_index()..]
    }

    /// `sup_{i ≤ -1} |Y_i|` over the window.
    pub fn sup_before(&self) -> f64 {
        self.backward().iter().fold(0.0, |m, y| m.max(y.abs()))
    }

    /// `sup_{i ≥ 1} |Y_i|` over the window.
    pub fn sup_after(&self) -> f64 {
        self.forward_from_zero()[1..].iter().fold(0.0, |m, y| m.max(y.abs()))
    }

    /// Cluster is accepted when no earlier value exceeds 1 in modulus.
    pub fn accepted(&self) -> bool {
        self.sup_before() <= 1.0
    }

    /// `Σ_{i ≥ 0} Y_i 1{|Y_i| > 1}`.
    pub fn cluster_sum_above_one(&self) -> f64 {
        self.forward_from_zero().iter().filter(|y| y.abs() > 1.0).sum()
    }

    pub fn has_opposite_signs(&self) -> bool {
        self.values.iter().any(|y| *y > 0.0) && self.values.iter().any(|y| *y < 0.0)
    }

    /// Same window divided by `|Y_0|`.
    pub fn spectral(&self) -> TailWindow {
        let r = self.y0().abs();
        TailWindow { first_lag: self.first_lag, values: self.values.iter().map(|y| y / r).collect() }
    }
}

/// Source of tail-process windows.
pub trait TailSampler: Sync {
    fn alpha(&self) -> f64;
    fn sample_window(&self, rng: &mut SimRng) -> TailWindow;
}

/// Analytic tail process of a finite moving average with nonnegative
/// coefficients: `Y_n = (c_{n+K} / c_K) Y_0`, `P(K = k) = c_k^α`.
#[derive(Debug, Clone)]
pub struct MaTailSampler {
    coefficients: Vec<f64>,
    alpha: f64,
    p: f64,
    lags: (usize, usize),
    cumulative: Vec<f64>,
}

impl MaTailSampler {
    /// `lags = (L, R)` gives the window `-L..=R`; both must cover the
    /// coefficient span.
    pub fn new(coefficients: &[f64], alpha: f64, p: f64, lags: (usize, usize)) -> Result<Self> {
        let marginal = MarginalSpec::new(alpha, p, 1.0)?;
        let ModelSpec::MovingAverage { coefficients, .. } = ModelSpec::moving_average(marginal, coefficients)? else {
            unreachable!()
        };
        let m = coefficients.len() - 1;
        if lags.1 < m {
            return Err(Error::WindowTooShort { needed: m, got: lags.1 });
        }
        if lags.0 < m {
            return Err(Error::WindowTooShort { needed: m, got: lags.0 });
        }
        let mut acc = 0.0;
        let cumulative = coefficients
            .iter()
            .map(|c| {
                acc += c.powf(alpha);
                acc
            })
            .collect();
        Ok(Self { coefficients, alpha, p, lags, cumulative })
    }

    pub fn iid(alpha: f64, p: f64) -> Result<Self> {
        Self::new(&[1.0], alpha, p, (1, 1))
    }

    /// Sampler for the tail process of `spec` when it is known in closed
    /// form: i.i.d., moving averages and the asymptotically independent
    /// models.
    pub fn for_model(spec: &ModelSpec, lags: (usize, usize)) -> Result<Self> {
        match spec {
            ModelSpec::MovingAverage { marginal, coefficients } => Self::new(coefficients, marginal.alpha, marginal.p, lags),
            ModelSpec::Iid { marginal } | ModelSpec::StochVol { marginal, .. } | ModelSpec::IsolatedExtremes { marginal, .. } => {
                Self::new(&[1.0], marginal.alpha, marginal.p, lags)
            }
            ModelSpec::Garch11Squared { .. } => {
                Err(Error::Unsupported("no closed-form tail process for the squared GARCH; use empirical windows".into()))
            }
        }
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    fn coefficient(&self, i: i64) -> f64 {
        if i < 0 {
            return 0.0;
        }
        self.coefficients.get(i as usize).copied().unwrap_or(0.0)
    }
}

impl TailSampler for MaTailSampler {
    fn alpha(&self) -> f64 {
        self.alpha
    }

    fn sample_window(&self, rng: &mut SimRng) -> TailWindow {
        let r = open_unit(rng).powf(-1.0 / self.alpha);
        let y0 = if rng.random::<f64>() < self.p { r } else { -r };
        let v = rng.random::<f64>() * self.cumulative[self.cumulative.len() - 1];
        let k = self.cumulative.iter().position(|c| v < *c).unwrap_or(self.cumulative.len() - 1) as i64;
        let ck = self.coefficient(k);
        let (l, rr) = (self.lags.0 as i64, self.lags.1 as i64);
        let values = (-l..=rr).map(|n| self.coefficient(n + k) / ck * y0).collect();
        TailWindow { first_lag: -l, values }
    }
}

/// Resamples a fixed population of windows, e.g. empirical tail windows.
#[derive(Debug, Clone)]
pub struct EmpiricalTailSampler {
    alpha: f64,
    windows: Vec<TailWindow>,
}

impl EmpiricalTailSampler {
    pub fn new(alpha: f64, windows: Vec<TailWindow>) -> Result<Self> {
        if windows.is_empty() {
            return Err(Error::TooFewExceedances { got: 0, need: 1 });
        }
        if !(alpha > 0.0) {
            return Err(invalid("alpha must be positive"));
        }
        Ok(Self { alpha, windows })
    }

    pub fn windows(&self) -> &[TailWindow] {
        &self.windows
    }
}

impl TailSampler for EmpiricalTailSampler {
    fn alpha(&self) -> f64 {
        self.alpha
    }

    fn sample_window(&self, rng: &mut SimRng) -> TailWindow {
        self.windows[rng.random_range(0..self.windows.len())].clone()
    }
}

/// One window of the moving-average tail process on substream
/// `(seed, TAIL, 0)`.
pub fn ma_tail_process(coefficients: &[f64], alpha: f64, p: f64, seed: u64, lags: (usize, usize)) -> Result<TailWindow> {
    let sampler = MaTailSampler::new(coefficients, alpha, p, lags)?;
    Ok(sampler.sample_window(&mut domain_stream(seed, domain::TAIL, 0)))
}

/// `θ = max_k c_k^α` after normalising `Σ c_k^α = 1`.
pub fn extremal_index_ma(coefficients: &[f64], alpha: f64) -> Result<f64> {
    let sampler = MaTailSampler::new(coefficients, alpha, 1.0, (coefficients.len(), coefficients.len()))?;
    Ok(sampler.coefficients.iter().map(|c| c.powf(alpha)).fold(0.0, f64::max))
}

/// Closed-form extremal index where the tail process is known.
pub fn extremal_index_theoretical(spec: &ModelSpec) -> Result<f64> {
    match spec {
        ModelSpec::MovingAverage { marginal, coefficients } => extremal_index_ma(coefficients, marginal.alpha),
        ModelSpec::Iid { .. } | ModelSpec::StochVol { .. } | ModelSpec::IsolatedExtremes { .. } => Ok(1.0),
        ModelSpec::Garch11Squared { .. } => {
            Err(Error::Unsupported("extremal index of the squared GARCH needs a tail sampler".into()))
        }
    }
}

fn mc_over_windows<S, F>(sampler: &S, reps: usize, seed: u64, dom: u64, f: F) -> Moments
where
    S: TailSampler + ?Sized,
    F: Fn(&TailWindow) -> f64 + Sync,
{
    let parts = chunked(reps, CHUNK, seed, dom, |rng, len| {
        let mut m = Moments::default();
        for _ in 0..len {
            m.push(f(&sampler.sample_window(rng)));
        }
        m
    });
    Moments::merge_all(&parts)
}

/// `θ = E[sup_{i≥0} |Θ_i|^α − sup_{i≥1} |Θ_i|^α]` by Monte Carlo.
pub fn extremal_index_spectral<S: TailSampler + ?Sized>(sampler: &S, reps: usize, seed: u64) -> Result<Estimate> {
    if reps < 2 {
        return Err(invalid("need at least 2 replicates"));
    }
    let a = sampler.alpha();
    let m = mc_over_windows(sampler, reps, seed, domain::TAIL, |w| {
        let s = w.spectral();
        let after = s.sup_after();
        after.max(1.0).powf(a) - after.powf(a)
    });
    Ok(Estimate::from_moments(&m, seed, "spectral_monte_carlo"))
}

/// Accepted cluster: the nonzero values of a window with
/// `sup_{i≤-1} |Y_i| ≤ 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterDraw {
    pub marks: Vec<f64>,
    pub attempts: u64,
}

/// Rejection sampler for the cluster process.
pub fn sample_cluster_process<S: TailSampler + ?Sized>(sampler: &S, rng: &mut SimRng, cap: u64) -> Result<ClusterDraw> {
    for attempt in 1..=cap {
        let w = sampler.sample_window(rng);
        if w.accepted() {
            let marks = w.values.into_iter().filter(|y| *y != 0.0).collect();
            return Ok(ClusterDraw { marks, attempts: attempt });
        }
    }
    Err(Error::RejectionCapExceeded(cap))
}

/// Fraction of accepted windows among `attempts` draws; estimates θ.
pub fn cluster_acceptance_rate<S: TailSampler + ?Sized>(sampler: &S, attempts: usize, seed: u64) -> Result<Estimate> {
    if attempts < 2 {
        return Err(invalid("need at least 2 attempts"));
    }
    let m = mc_over_windows(sampler, attempts, seed, domain::CLUSTER, |w| if w.accepted() { 1.0 } else { 0.0 });
    Ok(Estimate::from_moments(&m, seed, "rejection_acceptance"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Upper,
    Lower,
}

fn check_nu_args(u: f64, reps: usize) -> Result<()> {
    if !(u > 0.0) {
        return Err(invalid(format!("u must be positive, got {u}")));
    }
    if reps < MIN_TAIL_REPS {
        return Err(Error::SampleTooSmall { got: reps, need: MIN_TAIL_REPS });
    }
    Ok(())
}

/// Accepted cluster sums `u Σ_{i≥0} Y_i 1{|Y_i|>1}`; rejected windows give NaN.
fn cluster_sums<S: TailSampler + ?Sized>(sampler: &S, u: f64, reps: usize, seed: u64) -> Vec<f64> {
    chunked(reps, CHUNK, seed, domain::TAIL, |rng, len| {
        (0..len)
            .map(|_| {
                let w = sampler.sample_window(rng);
                if w.accepted() {
                    u * w.cluster_sum_above_one()
                } else {
                    f64::NAN
                }
            })
            .collect::<Vec<_>>()
    })
    .concat()
}

fn side_hits(sums: &[f64], x: f64, side: Side) -> u64 {
    sums.iter()
        .filter(|w| match side {
            Side::Upper => **w > x,
            Side::Lower => **w < -x,
        })
        .count() as u64
}

fn scaled_proportion(hits: u64, reps: usize, scale: f64, seed: u64) -> Estimate {
    let ph = hits as f64 / reps as f64;
    let se = (ph * (1.0 - ph) / reps as f64).sqrt();
    Estimate::monte_carlo(scale * ph, scale * se, reps as u64, seed, "cluster_monte_carlo")
}

/// `ν^(u)(x, ∞)` (or `ν^(u)(-∞, -x)` for `Side::Lower`):
/// `u^{-α} P(±u Σ_{i≥0} Y_i 1{|Y_i|>1} > x, sup_{i≤-1} |Y_i| ≤ 1)`.
pub fn nu_u_tail<S: TailSampler + ?Sized>(sampler: &S, u: f64, x: f64, side: Side, reps: usize, seed: u64) -> Result<Estimate> {
    Ok(nu_u_tail_curve(sampler, u, &[x], side, reps, seed)?.remove(0))
}

/// `ν^(u)` tails at several `x`, all from the same windows.
pub fn nu_u_tail_curve<S: TailSampler + ?Sized>(
    sampler: &S,
    u: f64,
    xs: &[f64],
    side: Side,
    reps: usize,
    seed: u64,
) -> Result<Vec<Estimate>> {
    check_nu_args(u, reps)?;
    if xs.iter().any(|x| !(*x > 0.0)) {
        return Err(invalid("x must be positive"));
    }
    let sums = cluster_sums(sampler, u, reps, seed);
    let scale = u.powf(-sampler.alpha());
    Ok(xs.iter().map(|x| scaled_proportion(side_hits(&sums, *x, side), reps, scale, seed)).collect())
}

/// Ratio `ν^(u)(sx, ∞) / ν^(u)(x, ∞)` from common windows, with the
/// binomial standard error of a proportion among the hits at `x`.
pub fn nu_u_scaling_ratio<S: TailSampler + ?Sized>(sampler: &S, u: f64, x: f64, s: f64, reps: usize, seed: u64) -> Result<Estimate> {
    check_nu_args(u, reps)?;
    if !(x > 0.0 && s >= 1.0) {
        return Err(invalid("need x > 0 and s >= 1"));
    }
    let sums = cluster_sums(sampler, u, reps, seed);
    let n1 = side_hits(&sums, x, Side::Upper);
    let n2 = side_hits(&sums, s * x, Side::Upper);
    if n1 == 0 {
        return Err(Error::TooFewExceedances { got: 0, need: 1 });
    }
    let r = n2 as f64 / n1 as f64;
    Ok(Estimate::monte_carlo(r, (r * (1.0 - r) / n1 as f64).sqrt(), reps as u64, seed, "common_window_ratio"))
}

/// Lévy measure `ν(dx) = (c₊ 1{x>0} + c₋ 1{x<0}) α|x|^{-α-1} dx` and drift `b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevyTriple {
    pub alpha: f64,
    pub c_plus: f64,
    pub c_minus: f64,
    pub b: f64,
}

impl LevyTriple {
    pub fn new(alpha: f64, c_plus: f64, c_minus: f64, b: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 2.0) {
            return Err(invalid(format!("alpha must lie in (0, 2), got {alpha}")));
        }
        if !(c_plus >= 0.0 && c_minus >= 0.0 && c_plus.is_finite() && c_minus.is_finite()) {
            return Err(invalid("c_plus and c_minus must be finite and nonnegative"));
        }
        if !b.is_finite() {
            return Err(invalid("drift must be finite"));
        }
        Ok(Self { alpha, c_plus, c_minus, b })
    }

    /// Triple `(0, μ, 0)` of the i.i.d. limit.
    pub fn iid(marginal: &MarginalSpec) -> Self {
        Self { alpha: marginal.alpha, c_plus: marginal.p, c_minus: marginal.q(), b: 0.0 }
    }

    pub fn upper_tail(&self, x: f64) -> f64 {
        self.c_plus * x.powf(-self.alpha)
    }

    pub fn lower_tail(&self, x: f64) -> f64 {
        self.c_minus * x.powf(-self.alpha)
    }

    /// `ν({|x| > u})`.
    pub fn tail_mass(&self, u: f64) -> f64 {
        (self.c_plus + self.c_minus) * u.powf(-self.alpha)
    }

    /// `∫_{u<|x|≤1} x ν(dx)`.
    pub fn truncated_first_moment(&self, u: f64) -> f64 {
        (self.c_plus - self.c_minus) * power_integral(self.alpha, u)
    }

    /// `∫_{|x|≤u} x² ν(dx)`.
    pub fn small_jump_variance(&self, u: f64) -> f64 {
        let a = self.alpha;
        (self.c_plus + self.c_minus) * a * u.powf(2.0 - a) / (2.0 - a)
    }

    /// Triple with `c_±` multiplied by `s`.
    pub fn scaled(&self, s: f64) -> Self {
        Self { c_plus: s * self.c_plus, c_minus: s * self.c_minus, ..*self }
    }
}

/// `∫_u^1 α x^{-α} dx`.
pub fn power_integral(alpha: f64, u: f64) -> f64 {
    if (alpha - 1.0).abs() < 1e-12 {
        -u.ln()
    } else {
        alpha * (1.0 - u.powf(1.0 - alpha)) / (1.0 - alpha)
    }
}

/// Triple of the moving-average limit: `c₊ = p(Σc)^α`, `c₋ = q(Σc)^α`,
/// `b = (p−q) α/(1−α) ((Σc)^α − 1)`.
pub fn levy_triple_ma(coefficients: &[f64], alpha: f64, p: f64) -> Result<LevyTriple> {
    if (alpha - 1.0).abs() < 1e-12 {
        return Err(Error::Unsupported("moving-average drift for alpha = 1 is not available".into()));
    }
    let marginal = MarginalSpec::new(alpha, p, 1.0)?;
    let ModelSpec::MovingAverage { coefficients, .. } = ModelSpec::moving_average(marginal, coefficients)? else {
        unreachable!()
    };
    let s_alpha = coefficients.iter().sum::<f64>().powf(alpha);
    let q = 1.0 - p;
    LevyTriple::new(alpha, p * s_alpha, q * s_alpha, (p - q) * alpha / (1.0 - alpha) * (s_alpha - 1.0))
}

/// `c_± = E[max(±Σ_{i≥0} Θ_i, 0)^α 1{Θ_i = 0 ∀ i ≤ -1}]` by Monte Carlo.
pub fn spectral_triple_constants<S: TailSampler + ?Sized>(sampler: &S, reps: usize, seed: u64) -> Result<(Estimate, Estimate)> {
    if reps < 2 {
        return Err(invalid("need at least 2 replicates"));
    }
    let a = sampler.alpha();
    let parts = chunked(reps, CHUNK, seed, domain::TAIL, |rng, len| {
        let (mut plus, mut minus) = (Moments::default(), Moments::default());
        for _ in 0..len {
            let s = sampler.sample_window(rng).spectral();
            let (cp, cm) = if s.backward().iter().all(|t| *t == 0.0) {
                let sum: f64 = s.forward_from_zero().iter().sum();
                (sum.max(0.0).powf(a), (-sum).max(0.0).powf(a))
            } else {
                (0.0, 0.0)
            };
            plus.push(cp);
            minus.push(cm);
        }
        (plus, minus)
    });
    let plus: Vec<Moments> = parts.iter().map(|p| p.0).collect();
    let minus: Vec<Moments> = parts.iter().map(|p| p.1).collect();
    Ok((
        Estimate::from_moments(&Moments::merge_all(&plus), seed, "spectral_monte_carlo"),
        Estimate::from_moments(&Moments::merge_all(&minus), seed, "spectral_monte_carlo"),
    ))
}

/// Tail index of the squared GARCH(1,1).
pub fn garch_tail_index_of(spec: &ModelSpec) -> Result<f64> {
    match spec {
        ModelSpec::Garch11Squared { alpha1, beta1, .. } => garch_tail_index(*alpha1, *beta1),
        _ => Err(invalid("not a GARCH model")),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GarchConstant {
    pub c_plus: Estimate,
    pub alpha: f64,
    /// `E[(alpha1 Z² + beta1)^alpha]`, which must be 1.
    pub moment_check: f64,
    pub truncation: usize,
    /// Mean of the last retained term of `T̃`.
    pub last_term_mean: f64,
}

/// `c₊ = E[(Z₀² + T̃)^α − T̃^α] / E|Z|^{2α}` with
/// `T̃ = Σ_{t=1}^{T} Z_{t+1}² Π_{i=1}^{t} (α₁ Z_i² + β₁)`.
pub fn garch_cplus(alpha1: f64, beta1: f64, reps: usize, truncation: usize, seed: u64) -> Result<GarchConstant> {
    if reps < 2 || truncation == 0 {
        return Err(invalid("need reps >= 2 and a positive truncation"));
    }
    let spec = ModelSpec::garch11_squared(1.0, alpha1, beta1)?;
    let alpha = spec.alpha();
    let moment_check = garch_moment(alpha1, beta1, alpha);
    if (moment_check - 1.0).abs() > 1e-6 {
        return Err(Error::NotStationary(format!("tail equation residual {}", moment_check - 1.0)));
    }
    let z_moment = 2f64.powf(alpha) * gamma(alpha + 0.5) / std::f64::consts::PI.sqrt();
    let parts = chunked(reps, 256, seed, domain::GARCH, |rng, len| {
        let (mut m, mut last) = (Moments::default(), Moments::default());
        for _ in 0..len {
            let z0: f64 = rng.sample(StandardNormal);
            let mut prod = 1.0;
            let mut t_tilde = 0.0;
            let mut term = 0.0;
            let mut z_next: f64 = rng.sample(StandardNormal);
            for _ in 0..truncation {
                let z_i = z_next;
                z_next = rng.sample(StandardNormal);
                prod *= alpha1 * z_i * z_i + beta1;
                term = z_next * z_next * prod;
                t_tilde += term;
            }
            m.push((z0 * z0 + t_tilde).powf(alpha) - t_tilde.powf(alpha));
            last.push(term);
        }
        (m, last)
    });
    let m = Moments::merge_all(&parts.iter().map(|p| p.0).collect::<Vec<_>>());
    let last = Moments::merge_all(&parts.iter().map(|p| p.1).collect::<Vec<_>>());
    let c_plus = Estimate::monte_carlo(m.mean() / z_moment, m.se() / z_moment, reps as u64, seed, "garch_monte_carlo");
    Ok(GarchConstant { c_plus, alpha, moment_check, truncation, last_term_mean: last.mean() })
}

/// GARCH triple `(α, c₊, 0, α/(1−α)(c₊ − 1))`; undefined for `α = 1`.
pub fn garch_triple(constant: &GarchConstant) -> Result<LevyTriple> {
    let a = constant.alpha;
    if (a - 1.0).abs() < 1e-9 {
        return Err(Error::Unsupported("GARCH drift for alpha = 1 is not available".into()));
    }
    LevyTriple::new(a, constant.c_plus.value, 0.0, a / (1.0 - a) * (constant.c_plus.value - 1.0))
}

/// Input for [`drift_bu`].
pub enum DriftSource<'a> {
    Triple(&'a LevyTriple),
    Sampler(&'a (dyn TailSampler + 'a)),
}

/// `b_u = ∫_{u<|x|≤1} x ν^(u)(dx) − ∫_{u<|x|≤1} x μ(dx)`.
///
/// With a triple, `ν` stands in for `ν^(u)` (valid for `α < 1`). With a
/// sampler, the radius `|Y_0|` is integrated exactly for each spectral
/// window and only the window is drawn at random.
pub fn drift_bu(u: f64, source: DriftSource<'_>, p: f64, alpha: f64, reps: usize, seed: u64) -> Result<Estimate> {
    if !(u > 0.0 && u < 1.0) {
        return Err(invalid(format!("u must lie in (0, 1), got {u}")));
    }
    let mu_part = (2.0 * p - 1.0) * power_integral(alpha, u);
    match source {
        DriftSource::Triple(t) => {
            if t.alpha >= 1.0 {
                return Err(Error::Unsupported("closed-form b_u needs alpha < 1; supply a tail sampler".into()));
            }
            Ok(Estimate::exact(t.truncated_first_moment(u) - mu_part, "closed_form"))
        }
        DriftSource::Sampler(s) => {
            if reps < 2 {
                return Err(invalid("need at least 2 replicates"));
            }
            let a = s.alpha();
            let m = mc_over_windows(s, reps, seed, domain::TAIL, |w| radial_cluster_moment(&w.spectral(), u, a));
            let scale = u.powf(-a);
            Ok(Estimate::monte_carlo(scale * m.mean() - mu_part, scale * m.se(), reps as u64, seed, "rao_blackwell"))
        }
    }
}

/// `E_r[W(r) 1{u < |W(r)| ≤ 1} 1{accept(r)}]` for `r ~ Pareto(α)`, where
/// `W(r) = u r Σ_{i≥0} Θ_i 1{r|Θ_i| > 1}` and acceptance needs
/// `r sup_{i≤-1} |Θ_i| ≤ 1`.
fn radial_cluster_moment(theta: &TailWindow, u: f64, alpha: f64) -> f64 {
    let sup_before = theta.sup_before();
    let r_max = if sup_before > 0.0 { 1.0 / sup_before } else { f64::INFINITY };
    if r_max <= 1.0 {
        return 0.0;
    }
    let mut entries: Vec<(f64, f64)> =
        theta.forward_from_zero().iter().filter(|t| **t != 0.0).map(|t| (1.0 / t.abs(), *t)).collect();
    entries.sort_by(|a, b| a.0.total_cmp(&b.0));
    // Breakpoints at or below 1 are active from the start (|Θ_0| = 1 is
    // active for r > 1).
    let mut sum = 0.0;
    let mut idx = 0;
    while idx < entries.len() && entries[idx].0 <= 1.0 {
        sum += entries[idx].1;
        idx += 1;
    }
    let mut total = 0.0;
    let mut lo: f64 = 1.0;
    loop {
        let hi = entries.get(idx).map_or(f64::INFINITY, |e| e.0).min(r_max);
        if sum != 0.0 {
            // u < u r |S| ≤ 1  ⇔  r ∈ (1/|S|, 1/(u|S|)].
            let a = lo.max(1.0 / sum.abs());
            let b = hi.min(1.0 / (u * sum.abs()));
            if b > a {
                let antideriv = |r: f64| {
                    if (alpha - 1.0).abs() < 1e-12 {
                        r.ln()
                    } else {
                        r.powf(1.0 - alpha) / (1.0 - alpha)
                    }
                };
                total += u * sum * alpha * (antideriv(b) - antideriv(a));
            }
        }
        if hi >= r_max || idx >= entries.len() {
            break;
        }
        lo = hi;
        sum += entries[idx].1;
        idx += 1;
    }
    total
}

/// `b_u` over a grid with a least-squares fit `b_u ≈ b + k u^{|1−α|}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftTrend {
    pub points: Vec<(f64, Estimate)>,
    pub extrapolated_b: f64,
    pub approximation: bool,
}

pub fn drift_trend(u_grid: &[f64], source: DriftSource<'_>, p: f64, alpha: f64, reps: usize, seed: u64) -> Result<DriftTrend> {
    if u_grid.len() < 2 {
        return Err(invalid("drift trend needs at least two u values"));
    }
    let mut points = Vec::with_capacity(u_grid.len());
    for &u in u_grid {
        let src = match &source {
            DriftSource::Triple(t) => DriftSource::Triple(t),
            DriftSource::Sampler(s) => DriftSource::Sampler(*s),
        };
        points.push((u, drift_bu(u, src, p, alpha, reps, seed)?));
    }
    let xs: Vec<f64> = points.iter().map(|(u, _)| u.powf((1.0 - alpha).abs())).collect();
    let ys: Vec<f64> = points.iter().map(|(_, e)| e.value).collect();
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    Ok(DriftTrend { points, extrapolated_b: my - slope * mx, approximation: true })
}

/// Serialisable triple with provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TripleReport {
    pub alpha: f64,
    pub c_plus: f64,
    pub c_minus: f64,
    pub b: f64,
    pub method: String,
    pub se: Option<f64>,
    pub reps: Option<u64>,
    pub seed: Option<u64>,
}

impl TripleReport {
    pub fn exact(t: &LevyTriple, method: &str) -> Self {
        Self { alpha: t.alpha, c_plus: t.c_plus, c_minus: t.c_minus, b: t.b, method: method.into(), se: None, reps: None, seed: None }
    }

    pub fn triple(&self) -> Result<LevyTriple> {
        LevyTriple::new(self.alpha, self.c_plus, self.c_minus, self.b)
    }
}
