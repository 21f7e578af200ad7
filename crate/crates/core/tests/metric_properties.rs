use clusterflt_core::cadlag::{l1_distance, m1_distance, uniform_distance, CadlagPath};
use clusterflt_core::harness::metric::graph_hausdorff;
use proptest::prelude::*;

const TOL: f64 = 1e-7;

fn step_path() -> impl Strategy<Value = CadlagPath> {
    (-2.0..2.0f64, prop::collection::vec((0.001..=1.0f64, -2.0..2.0f64), 0..6)).prop_map(|(initial, mut jumps)| {
        jumps.sort_by(|a, b| a.0.total_cmp(&b.0));
        jumps.dedup_by(|a, b| a.0 == b.0);
        CadlagPath::new(initial, jumps).unwrap()
    })
}

fn nondecreasing_path() -> impl Strategy<Value = CadlagPath> {
    (-1.0..1.0f64, prop::collection::vec((0.001..=1.0f64, 0.01..1.0f64), 0..5))
        .prop_map(|(initial, mut incs)| {
        incs.sort_by(|a, b| a.0.total_cmp(&b.0));
        CadlagPath::from_increments(initial, incs).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn metric_axioms(a in step_path(), b in step_path(), c in step_path()) {
        let ab = m1_distance(&a, &b, TOL).unwrap();
        let ba = m1_distance(&b, &a, TOL).unwrap();
        prop_assert!(ab >= 0.0);
        prop_assert!(m1_distance(&a, &a, TOL).unwrap() <= TOL);
        prop_assert!((ab - ba).abs() <= 3.0 * TOL);
        let ac = m1_distance(&a, &c, TOL).unwrap();
        let bc = m1_distance(&b, &c, TOL).unwrap();
        prop_assert!(ac <= ab + bc + 3.0 * TOL, "{ac} > {ab} + {bc}");
    }

    #[test]
    fn uniform_dominates(a in step_path(), b in step_path()) {
        let u = uniform_distance(&a, &b);
        prop_assert!(m1_distance(&a, &b, TOL).unwrap() <= u + TOL);
        prop_assert!(l1_distance(&a, &b) <= u + 1e-12);
    }

    #[test]
    fn monotone_pairs_match_graph_hausdorff(a in nondecreasing_path(), b in nondecreasing_path()) {
        let h = 1e-4;
        let d = m1_distance(&a, &b, TOL).unwrap();
        let haus = graph_hausdorff(&a, &b, h);
        prop_assert!((d - haus).abs() <= TOL + h, "m1 {d} vs hausdorff {haus}");
    }

    #[test]
    fn horizontal_segments_reproduce_path(a in step_path(), t in 0.0..=1.0f64) {
        let is_jump = a.jumps().iter().any(|j| j.time == t);
        prop_assume!(!is_jump);
        prop_assert_eq!(a.completed_graph().horizontal_value(t), Some(a.eval(t)));
    }
}

#[test]
fn monotone_pair_is_not_the_pointwise_maximum() {
    // Pointwise discrepancies can be 1 while the graphs are 0.1 apart.
    let x = CadlagPath::new(0.0, [(0.5, 1.0)]).unwrap();
    let y = CadlagPath::new(0.0, [(0.6, 1.0)]).unwrap();
    assert_eq!(uniform_distance(&x, &y), 1.0);
    assert!((m1_distance(&x, &y, TOL).unwrap() - 0.1).abs() < 2.0 * TOL);
}
