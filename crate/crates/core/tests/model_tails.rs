use clusterflt_core::harness::ks_two_sample;
use clusterflt_core::models::{simulate_series, MarginalSpec, ModelSpec};
use clusterflt_core::rng::domain_stream;
use clusterflt_core::stats::quantile;

const N: usize = 1_000_000;

fn marginal(alpha: f64, p: f64) -> MarginalSpec {
    MarginalSpec::new(alpha, p, 1.0).unwrap()
}

fn models() -> Vec<ModelSpec> {
    vec![
        ModelSpec::iid(marginal(1.0, 0.3)),
        ModelSpec::moving_average(marginal(0.5, 0.3), &[0.25, 0.25]).unwrap(),
        ModelSpec::moving_average(marginal(1.0, 0.3), &[0.5, 0.5]).unwrap(),
        ModelSpec::moving_average(marginal(1.5, 0.3), &[1.0, 0.5, 0.25]).unwrap(),
        ModelSpec::stoch_vol(marginal(1.0, 0.3), 0.5, 0.5).unwrap(),
        ModelSpec::isolated_extremes(marginal(1.0, 0.3), 0.5).unwrap(),
    ]
}

/// `(P̂(|X| > 2x) / P̂(|X| > x), SE)` and `(P̂(X > x) / P̂(|X| > x), SE)` at
/// the empirical `level` quantile of `|X|`.
fn tail_stats(x: &[f64], level: f64) -> ((f64, f64), (f64, f64)) {
    let abs: Vec<f64> = x.iter().map(|v| v.abs()).collect();
    let q = quantile(&abs, level);
    let n1 = abs.iter().filter(|v| **v > q).count() as f64;
    let n2 = abs.iter().filter(|v| **v > 2.0 * q).count() as f64;
    let pos = x.iter().filter(|v| **v > q).count() as f64;
    let prop = |k: f64| (k / n1, (k / n1 * (1.0 - k / n1) / n1).sqrt());
    (prop(n2), prop(pos))
}

/// Sums of opposite-signed innovations cancel at moderate levels, so the
/// moving averages are checked further out.
fn level_for(spec: &ModelSpec) -> f64 {
    if spec.name() == "ma" { 0.999 } else { 0.99 }
}

#[test]
fn tail_ratio_matches_regular_variation() {
    for (i, spec) in models().into_iter().enumerate() {
        let x = simulate_series(&spec, N, 100 + i as u64).unwrap();
        let ((r, se), _) = tail_stats(&x, level_for(&spec));
        let target = 2f64.powf(-spec.alpha());
        assert!((r - target).abs() <= 3.0 * se, "{}: ratio {r} vs {target} (SE {se})", spec.name());
    }
}

#[test]
fn tail_balance() {
    for (i, spec) in models().into_iter().enumerate() {
        let x = simulate_series(&spec, N, 200 + i as u64).unwrap();
        let (_, (b, se)) = tail_stats(&x, level_for(&spec));
        assert!((b - spec.p()).abs() <= 3.0 * se, "{}: balance {b} vs {} (SE {se})", spec.name(), spec.p());
    }
}

#[test]
fn isolated_extremes_keep_the_target_marginal() {
    let m = marginal(0.8, 0.6);
    let spec = ModelSpec::isolated_extremes(m, 0.7).unwrap();
    let x = simulate_series(&spec, 100_000, 5).unwrap();
    let mut rng = domain_stream(6, 0, 0);
    let reference: Vec<f64> = (0..100_000).map(|_| m.sample(&mut rng)).collect();
    let ks = ks_two_sample(&x, &reference).unwrap();
    assert!(ks.p_value > 0.01, "{ks:?}");
}

#[test]
fn output_does_not_depend_on_the_thread_pool() {
    let spec = ModelSpec::garch11_squared(0.1, 0.5, 0.3).unwrap();
    let run = |threads| {
        rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap().install(|| simulate_series(&spec, 5000, 9).unwrap())
    };
    assert_eq!(run(1), run(4));
}
