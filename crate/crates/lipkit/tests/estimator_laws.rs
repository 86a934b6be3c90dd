//! Cross-cutting estimator laws: the order relation between the three
//! constants, lower-bound semantics against known analytic constants, and
//! the gradient cross-oracle.

use lipkit::corpus::{known_unit_box_constant, probe_corpus};
use lipkit::func::ScalarFunc;
use lipkit::lipest::{global_lip, local_lip, local_lip_via_gradient, pointwise_lip, EstimatorConfig};
use lipkit::metric::MetricSpace;

/// Relative slack allowed between sampled estimates in the order relation.
const ORDER_SLACK: f64 = 0.03;

#[test]
fn order_law_pointwise_local_global() {
    let b = MetricSpace::unit_box(2).unwrap();
    let corpus = lipkit::corpus::builtin_corpus(&b, 2, 10).unwrap();
    let cfg = EstimatorConfig::default().with_pairs(8000).with_seed(2);
    // Deep budget on the global side; see the corner-maximizer note in the
    // acceptance suite.
    let glob_cfg = EstimatorConfig::default()
        .with_pairs(1_000_000)
        .with_seed(2)
        .with_workers(4);
    let panel = b.sample_points(3, 101);
    for f in &corpus {
        let glob = global_lip(f, &b, &glob_cfg).unwrap().value;
        for p in &panel {
            let loc = local_lip(f, p, &b, &cfg).unwrap().value;
            let pt = pointwise_lip(f, p, &b, &cfg).unwrap().value;
            assert!(
                pt <= loc * (1.0 + ORDER_SLACK) + 1e-12,
                "{}: pointwise {pt} > local {loc} at {:?}",
                f.label(),
                p.coords()
            );
            assert!(
                loc <= glob * (1.0 + ORDER_SLACK) + 1e-12,
                "{}: local {loc} > global {glob} at {:?}",
                f.label(),
                p.coords()
            );
        }
    }
}

#[test]
fn lower_bound_law_against_analytic_constants() {
    let b = MetricSpace::unit_box(2).unwrap();
    let corpus = probe_corpus(&b, 5, Some(12)).unwrap();
    let cfg = EstimatorConfig::default().with_pairs(10_000).with_seed(5);
    let mut checked = 0;
    for f in &corpus {
        let Some(truth) = known_unit_box_constant(f.label(), 2) else {
            continue;
        };
        checked += 1;
        let est = global_lip(f, &b, &cfg).unwrap().value;
        assert!(
            est <= truth + 1e-9,
            "{}: estimate {est} exceeds the true constant {truth}",
            f.label()
        );
        if truth > 0.0 {
            let floor = if f.label() == "product01" { 0.8 } else { 0.9 };
            assert!(
                est >= floor * truth,
                "{}: estimate {est} is implausibly far below {truth}",
                f.label()
            );
        }
    }
    assert!(checked >= 8, "only {checked} corpus members had known constants");
}

#[test]
fn one_lipschitz_constructions_stay_below_one() {
    // Cone and witness functions are 1-Lipschitz by the triangle inequality;
    // sampled estimates must respect that bound while approaching it.
    let b = MetricSpace::unit_box(2).unwrap();
    let s = b.point(vec![0.2, 0.3]).unwrap();
    let t = b.point(vec![0.7, 0.8]).unwrap();
    let cfg = EstimatorConfig::default().with_pairs(10_000);
    for f in [
        lipkit::cone_function(&s, 1.0, &b).unwrap(),
        lipkit::witness_function(&s, &t, &b).unwrap(),
    ] {
        let est = global_lip(&f, &b, &cfg).unwrap().value;
        assert!(est <= 1.0 + 1e-9, "{}: {est}", f.label());
        assert!(est >= 0.95, "{}: {est}", f.label());
    }
}

#[test]
fn witness_separation_forces_estimates_toward_one() {
    let b = MetricSpace::unit_box(2).unwrap();
    let s = b.point(vec![0.1, 0.1]).unwrap();
    let t = b.point(vec![0.9, 0.5]).unwrap();
    let f = lipkit::witness_function(&s, &t, &b).unwrap();
    // The two endpoints already certify L >= d(s,t)/d(s,t) = 1; sampled pairs
    // can only see slightly less.
    let d = b.distance(&s, &t).unwrap();
    assert!((f.eval(&t) - f.eval(&s) - d).abs() < 1e-15);
}

#[test]
fn gradient_cross_oracle_on_smooth_builtins() {
    // |local_lip_via_gradient - local_lip.value| <= 5% relative at random
    // interior points, for functions carrying exact gradients.
    let b = MetricSpace::unit_box(2).unwrap();
    let smooth: Vec<ScalarFunc> = probe_corpus(&b, 8, Some(10))
        .unwrap()
        .into_iter()
        .filter(|f| f.has_grad() && f.label() != "const:1")
        .collect();
    assert!(smooth.len() >= 4, "need several smooth corpus members");
    let cfg = EstimatorConfig::default().with_pairs(5000).with_seed(3);
    let interior = MetricSpace::box_nd(vec![0.1, 0.1], vec![0.9, 0.9]).unwrap();
    let mut compared = 0;
    for (i, raw) in interior.sample_points(100, 31).iter().enumerate() {
        let p = b.point(raw.coords().to_vec()).unwrap();
        let f = &smooth[i % smooth.len()];
        let fast = local_lip_via_gradient(f, &p).unwrap();
        if fast < 0.05 {
            continue; // relative comparison is meaningless at a critical point
        }
        let sampled = local_lip(f, &p, &b, &cfg).unwrap().value;
        let rel = (fast - sampled).abs() / fast;
        assert!(
            rel <= 0.05,
            "{} at {:?}: gradient {fast} vs sampled {sampled} ({rel:.4} rel)",
            f.label(),
            p.coords()
        );
        compared += 1;
    }
    assert!(compared >= 80, "only {compared} points compared");
}

#[test]
fn global_estimate_runtime_is_subsecond_at_default_budget() {
    let x = MetricSpace::interval(0.0, 1.0).unwrap();
    let f = ScalarFunc::coordinate(0, &x).unwrap();
    let cfg = EstimatorConfig::default().with_pairs(10_000);
    let start = std::time::Instant::now();
    let est = global_lip(&f, &x, &cfg).unwrap();
    let elapsed = start.elapsed();
    assert!(est.value >= 0.99 && est.value <= 1.0);
    assert!(
        elapsed.as_secs_f64() < 1.0,
        "took {elapsed:?} for 1e4 pairs"
    );
}
