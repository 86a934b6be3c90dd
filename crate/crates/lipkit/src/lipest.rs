//! Sampled estimators for the three Lipschitz-constant notions.
//!
//! Every estimate is the maximum difference quotient over the pairs actually
//! sampled, so it is a certified *lower bound* of the true constant; no
//! extrapolation is attempted. Local and pointwise estimators sweep a
//! shrinking radius schedule and report the whole trend alongside the value
//! at the smallest radius.
//!
//! Estimates are deterministic in `(config, seed)`: the reduction is a pure
//! max, so fanning evaluation out over more workers cannot change a bit.

use crate::error::{Error, Result};
use crate::func::{gradient, ScalarFunc};
use crate::metric::{euclid_norm, MetricSpace, Point};
use crate::report::Json;

/// Default number of sampled pairs per stage.
pub const DEFAULT_PAIRS_PER_STAGE: usize = 20_000;
/// Default largest radius of the shrinking schedule.
pub const DEFAULT_RADIUS_START: f64 = 0.5;
/// Default number of halvings, giving radii `0.5 * 2^-k` for `k = 0..=8`.
pub const DEFAULT_RADIUS_HALVINGS: u32 = 8;

/// Which Lipschitz constant an estimate approximates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimateKind {
    Global,
    Local,
    Pointwise,
}

impl EstimateKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            EstimateKind::Global => "global",
            EstimateKind::Local => "local",
            EstimateKind::Pointwise => "pointwise",
        }
    }
}

/// Sampling budget and radius schedule for the estimators.
#[derive(Debug, Clone)]
pub struct EstimatorConfig {
    /// Sampled pairs per stage (per radius for local/pointwise).
    pub pairs_per_stage: usize,
    /// Strictly decreasing positive radii; ignored by the global estimator.
    pub radii: Vec<f64>,
    pub seed: u64,
    /// Worker threads for fanning out quotient evaluation.
    pub workers: usize,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        EstimatorConfig {
            pairs_per_stage: DEFAULT_PAIRS_PER_STAGE,
            radii: geometric_radii(DEFAULT_RADIUS_START, DEFAULT_RADIUS_HALVINGS),
            seed: 0,
            workers: 1,
        }
    }
}

impl EstimatorConfig {
    pub fn with_pairs(mut self, pairs: usize) -> Self {
        self.pairs_per_stage = pairs;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_workers(mut self, workers: usize) -> Self {
        self.workers = workers.max(1);
        self
    }

    pub fn with_radius_halvings(mut self, halvings: u32) -> Self {
        self.radii = geometric_radii(DEFAULT_RADIUS_START, halvings);
        self
    }

    fn validate(&self) -> Result<()> {
        if self.pairs_per_stage == 0 {
            return Err(Error::InvalidConfig("pairs_per_stage must be >= 1".into()));
        }
        let decreasing = self
            .radii
            .windows(2)
            .all(|w| w[0] > w[1] && w[1] > 0.0);
        if self.radii.is_empty() || self.radii[0] <= 0.0 || !decreasing {
            return Err(Error::InvalidConfig(
                "radii must be strictly decreasing and positive".into(),
            ));
        }
        Ok(())
    }
}

/// The schedule `eps_k = eps0 * 2^-k` for `k = 0..=halvings`.
pub fn geometric_radii(eps0: f64, halvings: u32) -> Vec<f64> {
    (0..=halvings).map(|k| eps0 * 0.5f64.powi(k as i32)).collect()
}

/// A sampled Lipschitz-constant estimate with lower-bound semantics: `value`
/// is the maximum difference quotient over the pairs actually sampled.
#[derive(Debug, Clone)]
pub struct LipEstimate {
    pub kind: EstimateKind,
    pub value: f64,
    /// Base point for local/pointwise estimates; absent for global.
    pub at: Option<Point>,
    pub pairs_used: usize,
    /// Descending radius schedule; empty for global.
    pub radii: Vec<f64>,
    /// Per-radius stage suprema; `value` equals the last entry when present.
    pub trend: Vec<f64>,
    pub seed: u64,
}

impl LipEstimate {
    pub fn to_json(&self) -> Json {
        Json::obj([
            ("kind", Json::str(self.kind.as_str())),
            ("value", Json::Float(self.value)),
            (
                "at",
                match &self.at {
                    Some(p) => p.to_json(),
                    None => Json::Null,
                },
            ),
            ("pairs_used", Json::from(self.pairs_used)),
            ("radii", Json::floats(&self.radii)),
            ("trend", Json::floats(&self.trend)),
            ("seed", Json::from(self.seed)),
        ])
    }
}

/// Global Lipschitz constant estimate: maximum of `|f(x)-f(y)| / d(x,y)` over
/// consecutive disjoint pairs of the nested sample stream; zero-distance
/// pairs are skipped. Monotone nondecreasing in `pairs_per_stage` for a
/// fixed seed.
pub fn global_lip(f: &ScalarFunc, space: &MetricSpace, cfg: &EstimatorConfig) -> Result<LipEstimate> {
    cfg.validate()?;
    if f.domain().id() != space.id() {
        return Err(Error::SpaceMismatch);
    }
    // Consume the nested point stream in blocks so large budgets stay flat
    // in memory; blocking cannot change the result (pure max over the same
    // quotients in the same stream order).
    const BLOCK_PAIRS: usize = 65_536;
    let mut stream = space.stream(cfg.seed);
    let mut value = 0.0f64;
    let mut used = 0usize;
    let mut remaining = cfg.pairs_per_stage;
    let mut pts = Vec::with_capacity(2 * BLOCK_PAIRS.min(remaining));
    while remaining > 0 {
        let block = BLOCK_PAIRS.min(remaining);
        pts.clear();
        for _ in 0..2 * block {
            pts.push(stream.next_point());
        }
        let (block_max, block_used) = pair_sup(block, cfg.workers, &|i| {
            let (p, q) = (&pts[2 * i], &pts[2 * i + 1]);
            let d = space.distance_coords(p.coords(), q.coords());
            if d > 0.0 {
                Some(guarded_quotient(
                    f.eval_coords(p.coords()) - f.eval_coords(q.coords()),
                    d,
                ))
            } else {
                None
            }
        });
        value = value.max(block_max);
        used += block_used;
        remaining -= block;
    }
    if used == 0 {
        return Err(Error::Degenerate(
            "space yielded no distinct sample pairs".into(),
        ));
    }
    check_finite(value, f)?;
    Ok(LipEstimate {
        kind: EstimateKind::Global,
        value,
        at: None,
        pairs_used: used,
        radii: Vec::new(),
        trend: Vec::new(),
        seed: cfg.seed,
    })
}

/// Local Lipschitz constant estimate at `p`: for each radius the supremum of
/// pair quotients inside `B(p, eps_k)`, with per-radius derived seeds
/// `seed ^ k`; the value is the supremum at the smallest radius.
pub fn local_lip(
    f: &ScalarFunc,
    p: &Point,
    space: &MetricSpace,
    cfg: &EstimatorConfig,
) -> Result<LipEstimate> {
    stage_estimate(f, p, space, cfg, EstimateKind::Local)
}

/// Pointwise Lipschitz constant estimate at `p`: per radius, the supremum of
/// `|f(x)-f(p)| / d(x,p)` over sampled `x` in the punctured ball.
pub fn pointwise_lip(
    f: &ScalarFunc,
    p: &Point,
    space: &MetricSpace,
    cfg: &EstimatorConfig,
) -> Result<LipEstimate> {
    stage_estimate(f, p, space, cfg, EstimateKind::Pointwise)
}

fn stage_estimate(
    f: &ScalarFunc,
    p: &Point,
    space: &MetricSpace,
    cfg: &EstimatorConfig,
    kind: EstimateKind,
) -> Result<LipEstimate> {
    cfg.validate()?;
    if f.domain().id() != space.id() || p.space_id() != space.id() {
        return Err(Error::SpaceMismatch);
    }
    let mut trend = Vec::with_capacity(cfg.radii.len());
    let mut total_used = 0usize;
    let fp = f.eval_coords(p.coords());
    for (k, &eps) in cfg.radii.iter().enumerate() {
        let stage_seed = cfg.seed ^ (k as u64);
        let (sup, used) = match kind {
            EstimateKind::Local => {
                let pts = space.sample_ball(p, eps, 2 * cfg.pairs_per_stage, stage_seed)?;
                pair_sup(cfg.pairs_per_stage, cfg.workers, &|i| {
                    let (x, y) = (&pts[2 * i], &pts[2 * i + 1]);
                    let d = space.distance_coords(x.coords(), y.coords());
                    if d > 0.0 {
                        Some(guarded_quotient(
                            f.eval_coords(x.coords()) - f.eval_coords(y.coords()),
                            d,
                        ))
                    } else {
                        None
                    }
                })
            }
            EstimateKind::Pointwise => {
                let pts = space.sample_ball(p, eps, cfg.pairs_per_stage, stage_seed)?;
                pair_sup(cfg.pairs_per_stage, cfg.workers, &|i| {
                    let x = &pts[i];
                    let d = space.distance_coords(x.coords(), p.coords());
                    debug_assert!(d > 0.0, "ball samples are punctured");
                    Some(guarded_quotient(f.eval_coords(x.coords()) - fp, d))
                })
            }
            EstimateKind::Global => unreachable!(),
        };
        check_finite(sup, f)?;
        trend.push(sup);
        total_used += used;
    }
    Ok(LipEstimate {
        kind,
        value: *trend.last().expect("radii are validated nonempty"),
        at: Some(p.clone()),
        pairs_used: total_used,
        radii: cfg.radii.clone(),
        trend,
        seed: cfg.seed,
    })
}

/// Fast path on flat Euclidean domains: the local Lipschitz constant of a
/// differentiable function equals the Euclidean norm of its gradient.
pub fn local_lip_via_gradient(f: &ScalarFunc, p: &Point) -> Result<f64> {
    if !f.domain().is_euclidean_flat() {
        return Err(Error::Unsupported(
            "gradient identity requires a flat Euclidean domain".into(),
        ));
    }
    let g = gradient(f, p)?;
    Ok(euclid_norm(&g))
}

/// Difference quotients must survive a max reduction, and `f64::max`
/// silently drops NaN; map any non-finite quotient to +infinity so it
/// propagates and is reported as an evaluation failure afterwards.
fn guarded_quotient(diff: f64, d: f64) -> f64 {
    let q = diff.abs() / d;
    if q.is_finite() {
        q
    } else {
        f64::INFINITY
    }
}

fn check_finite(value: f64, f: &ScalarFunc) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(Error::EvalFailed(format!(
            "{} evaluated non-finite on sampled points",
            f.label()
        )))
    }
}

/// Max-reduce `quot(i)` over `i in 0..n`, optionally fanned out over worker
/// threads. Returns the supremum and the number of usable quotients. The
/// reduction is a pure max, so the result is identical for any worker count.
fn pair_sup(n: usize, workers: usize, quot: &(dyn Fn(usize) -> Option<f64> + Sync)) -> (f64, usize) {
    if workers <= 1 || n < 2 * workers {
        return reduce_range(0, n, quot);
    }
    let chunk = n.div_ceil(workers);
    let mut results = vec![(0.0f64, 0usize); workers];
    std::thread::scope(|scope| {
        for (w, slot) in results.iter_mut().enumerate() {
            let lo = w * chunk;
            let hi = ((w + 1) * chunk).min(n);
            scope.spawn(move || {
                *slot = if lo < hi {
                    reduce_range(lo, hi, quot)
                } else {
                    (0.0, 0)
                };
            });
        }
    });
    results
        .into_iter()
        .fold((0.0, 0), |(m, c), (m2, c2)| (m.max(m2), c + c2))
}

fn reduce_range(lo: usize, hi: usize, quot: &dyn Fn(usize) -> Option<f64>) -> (f64, usize) {
    let mut max = 0.0f64;
    let mut used = 0usize;
    for i in lo..hi {
        if let Some(q) = quot(i) {
            max = max.max(q);
            used += 1;
        }
    }
    (max, used)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::func::cone_function;

    fn small_cfg() -> EstimatorConfig {
        EstimatorConfig::default()
            .with_pairs(4000)
            .with_radius_halvings(6)
    }

    #[test]
    fn identity_function_has_unit_quotients() {
        let x = MetricSpace::interval(0.0, 1.0).unwrap();
        let f = ScalarFunc::coordinate(0, &x).unwrap();
        let cfg = EstimatorConfig::default().with_pairs(10_000);
        let est = global_lip(&f, &x, &cfg).unwrap();
        assert!(est.value >= 0.99 && est.value <= 1.0, "got {}", est.value);
        assert!(est.at.is_none());
        assert!(est.radii.is_empty() && est.trend.is_empty());
    }

    #[test]
    fn constant_function_estimates_zero_everywhere() {
        let x = MetricSpace::unit_box(2).unwrap();
        let f = ScalarFunc::constant(3.0, &x);
        let cfg = small_cfg();
        assert_eq!(global_lip(&f, &x, &cfg).unwrap().value, 0.0);
        let p = x.point(vec![0.5, 0.5]).unwrap();
        assert_eq!(local_lip(&f, &p, &x, &cfg).unwrap().value, 0.0);
        assert_eq!(pointwise_lip(&f, &p, &x, &cfg).unwrap().value, 0.0);
    }

    #[test]
    fn global_estimate_is_monotone_under_nested_refinement() {
        let b = MetricSpace::unit_box(2).unwrap();
        let f = ScalarFunc::product01(&b).unwrap();
        let mut prev = 0.0;
        for pairs in [50, 200, 1000, 5000] {
            let cfg = EstimatorConfig::default().with_pairs(pairs).with_seed(3);
            let est = global_lip(&f, &b, &cfg).unwrap();
            assert!(
                est.value >= prev,
                "value decreased under refinement: {} -> {}",
                prev,
                est.value
            );
            prev = est.value;
        }
    }

    #[test]
    fn worker_fanout_is_bitwise_identical() {
        let b = MetricSpace::unit_box(2).unwrap();
        let f = ScalarFunc::product01(&b).unwrap();
        let p = b.point(vec![0.4, 0.7]).unwrap();
        let base = small_cfg().with_seed(9);
        let seq_g = global_lip(&f, &b, &base).unwrap();
        let par_g = global_lip(&f, &b, &base.clone().with_workers(4)).unwrap();
        assert_eq!(seq_g.value.to_bits(), par_g.value.to_bits());
        assert_eq!(seq_g.pairs_used, par_g.pairs_used);

        let seq_l = local_lip(&f, &p, &b, &base).unwrap();
        let par_l = local_lip(&f, &p, &b, &base.clone().with_workers(3)).unwrap();
        assert_eq!(seq_l.value.to_bits(), par_l.value.to_bits());
        for (a, b) in seq_l.trend.iter().zip(&par_l.trend) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn local_estimate_of_product_matches_gradient_norm() {
        // L^loc at (u, v) of x*y is sqrt(u^2 + v^2).
        let b = MetricSpace::box_nd(vec![0.0, 0.0], vec![5.0, 5.0]).unwrap();
        let f = ScalarFunc::product01(&b).unwrap();
        let p = b.point(vec![3.0, 4.0]).unwrap();
        let est = local_lip(&f, &p, &b, &small_cfg()).unwrap();
        assert!(
            (est.value - 5.0).abs() / 5.0 < 0.05,
            "expected ~5, got {}",
            est.value
        );
        let fast = local_lip_via_gradient(&f, &p).unwrap();
        assert!((fast - 5.0).abs() < 1e-12);
    }

    #[test]
    fn trend_is_recorded_per_radius_and_value_is_last() {
        let x = MetricSpace::interval(0.0, 1.0).unwrap();
        let f = ScalarFunc::coordinate(0, &x).unwrap();
        let p = x.point(vec![0.5]).unwrap();
        let cfg = small_cfg();
        let est = local_lip(&f, &p, &x, &cfg).unwrap();
        assert_eq!(est.trend.len(), cfg.radii.len());
        assert_eq!(est.value, *est.trend.last().unwrap());
        assert_eq!(est.at.as_ref().unwrap().coords(), &[0.5]);
    }

    #[test]
    fn pointwise_vanishes_for_three_halves_power_at_its_kink() {
        // f(x) = |x - 1/2|^(3/2) has pointwise constant 0 at 1/2; at radius
        // eps the sampled quotient is at most eps^(1/2).
        let x = MetricSpace::interval(0.0, 1.0).unwrap();
        let f = ScalarFunc::new("threehalves", x.clone(), |x| (x[0] - 0.5).abs().powf(1.5));
        let p = x.point(vec![0.5]).unwrap();
        let cfg = EstimatorConfig::default().with_pairs(4000);
        let est = pointwise_lip(&f, &p, &x, &cfg).unwrap();
        let closed_form = cfg.radii.last().unwrap().sqrt();
        assert!(
            est.value <= closed_form + 1e-12,
            "{} exceeds the closed-form stage bound {closed_form}",
            est.value
        );
        assert!(est.value <= 0.05);
    }

    #[test]
    fn pointwise_of_identity_is_one() {
        let x = MetricSpace::interval(0.0, 1.0).unwrap();
        let f = ScalarFunc::coordinate(0, &x).unwrap();
        let p = x.point(vec![0.3]).unwrap();
        let est = pointwise_lip(&f, &p, &x, &small_cfg()).unwrap();
        assert!((est.value - 1.0).abs() < 0.02, "got {}", est.value);
    }

    #[test]
    fn cone_has_unit_pointwise_constant_at_its_apex() {
        let x = MetricSpace::interval(0.0, 1.0).unwrap();
        let q = x.point(vec![0.25]).unwrap();
        let f = cone_function(&q, 1.0, &x).unwrap();
        let est = pointwise_lip(&f, &q, &x, &small_cfg()).unwrap();
        assert!((est.value - 1.0).abs() < 0.02, "got {}", est.value);
    }

    #[test]
    fn tent_local_constant_is_one_everywhere() {
        let x = MetricSpace::interval(0.0, 1.0).unwrap();
        let t = ScalarFunc::tent(&x).unwrap();
        let cfg = EstimatorConfig::default()
            .with_pairs(2000)
            .with_radius_halvings(5);
        for &c in &[0.0, 0.2, 0.5, 0.8, 1.0] {
            let p = x.point(vec![c]).unwrap();
            let est = local_lip(&t, &p, &x, &cfg).unwrap();
            assert!(
                (est.value - 1.0).abs() < 0.02,
                "local constant at {c} was {}",
                est.value
            );
        }
    }

    #[test]
    fn isolated_point_error_propagates() {
        let f_space = MetricSpace::finite_set(vec![vec![0.0], vec![1.0]]).unwrap();
        let f = ScalarFunc::coordinate(0, &f_space).unwrap();
        let p = f_space.point(vec![0.0]).unwrap();
        let err = local_lip(&f, &p, &f_space, &small_cfg()).unwrap_err();
        assert!(matches!(err, Error::IsolatedPoint { .. }));
    }

    #[test]
    fn gradient_fast_path_rejects_quotient_domains() {
        let t = MetricSpace::torus(2).unwrap();
        let f = ScalarFunc::product01(&t).unwrap();
        let p = t.point(vec![0.3, 0.3]).unwrap();
        assert!(matches!(
            local_lip_via_gradient(&f, &p),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let x = MetricSpace::interval(0.0, 1.0).unwrap();
        let f = ScalarFunc::coordinate(0, &x).unwrap();
        let p = x.point(vec![0.5]).unwrap();
        let no_pairs = EstimatorConfig {
            pairs_per_stage: 0,
            ..EstimatorConfig::default()
        };
        assert!(matches!(
            global_lip(&f, &x, &no_pairs),
            Err(Error::InvalidConfig(_))
        ));
        let increasing_radii = EstimatorConfig {
            radii: vec![0.1, 0.2],
            ..EstimatorConfig::default()
        };
        assert!(matches!(
            local_lip(&f, &p, &x, &increasing_radii),
            Err(Error::InvalidConfig(_))
        ));
        let no_radii = EstimatorConfig {
            radii: vec![],
            ..EstimatorConfig::default()
        };
        assert!(matches!(
            pointwise_lip(&f, &p, &x, &no_radii),
            Err(Error::InvalidConfig(_))
        ));
    }

    #[test]
    fn estimate_json_shape() {
        let x = MetricSpace::interval(0.0, 1.0).unwrap();
        let f = ScalarFunc::coordinate(0, &x).unwrap();
        let cfg = EstimatorConfig::default().with_pairs(10);
        let est = global_lip(&f, &x, &cfg).unwrap();
        let json = est.to_json().to_string();
        assert!(json.starts_with("{\"kind\":\"global\",\"value\":"));
        assert!(json.contains("\"at\":null"));
        assert!(json.contains("\"pairs_used\":"));
        assert!(json.ends_with("\"seed\":0}"));
    }
}
