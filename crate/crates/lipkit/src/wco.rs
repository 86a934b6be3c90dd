//! Weighted composition operators and preservation checking.
//!
//! A [`WCOperator`] is a pair `(h, phi)` acting on functions by
//! `Tf(y) = h(y) * f(phi(y))` with `phi: Y -> X`. [`preservation_check`]
//! compares Lipschitz constants of `f` and `Tf` over a probe corpus with
//! *paired sampling*: both sides see the same sample pairs (mapped through
//! `phi` on the `f` side), so an operator that preserves constants exactly
//! produces literally identical quotient sets and a zero deviation instead
//! of one that merely sits inside a tuned tolerance.
//!
//! [`BlackBoxOperator`] wraps an arbitrary function-space map; its
//! weighted-composition *signature* can be probed without access to any
//! internals ([`wco_consistency_check`]), which is what separates genuine
//! weighted compositions from constant-preserving impostors like
//! [`shift_preserver`].

use crate::dilation::AffineMap;
use crate::error::{Error, Result};
use crate::func::{witness_function, ScalarFunc};
use crate::lipest::{EstimateKind, EstimatorConfig};
use crate::metric::{MetricSpace, Point};
use crate::report::Json;
use nalgebra::{DMatrix, DVector};
use std::sync::Arc;

/// Tolerance for algebraically exact comparisons (paired sampling, linearity).
pub const EXACT_TOL: f64 = 1e-9;
/// Tolerance for estimator-vs-estimator comparisons without pairing.
pub const ESTIMATOR_TOL: f64 = 5e-2;
/// Weights closer to zero than this make the signature test inapplicable.
const WEIGHT_FLOOR: f64 = 1e-9;
/// Sample budget for domain, constancy, and linearity spot checks.
const SPOT_CHECK_BUDGET: usize = 64;

type PointMap = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;

/// The symbol of a weighted composition operator: either a recovered /
/// constructed affine dilation or an opaque point map.
#[derive(Clone)]
pub enum Symbol {
    Affine(AffineMap),
    Map { label: String, map: PointMap },
}

impl Symbol {
    pub fn from_fn(
        label: impl Into<String>,
        map: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
    ) -> Self {
        Symbol::Map {
            label: label.into(),
            map: Arc::new(map),
        }
    }

    pub fn apply(&self, y: &[f64]) -> Vec<f64> {
        match self {
            Symbol::Affine(m) => m.apply(y),
            Symbol::Map { map, .. } => map(y),
        }
    }

    pub fn label(&self) -> String {
        match self {
            Symbol::Affine(m) => format!("affine(alpha={})", m.alpha()),
            Symbol::Map { label, .. } => label.clone(),
        }
    }

    pub fn to_json(&self) -> Json {
        match self {
            Symbol::Affine(m) => Json::obj([("affine", m.to_json())]),
            Symbol::Map { label, .. } => Json::obj([("blackbox", Json::str(label.clone()))]),
        }
    }
}

impl std::fmt::Debug for Symbol {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Symbol({})", self.label())
    }
}

/// Weighted composition operator `Tf = h * (f o phi)` from functions on `X`
/// (source) to functions on `Y` (target), with `phi: Y -> X`.
#[derive(Debug, Clone)]
pub struct WCOperator {
    weight: ScalarFunc,
    symbol: Symbol,
    source: MetricSpace,
    target: MetricSpace,
}

impl WCOperator {
    /// Construct and spot-check that the symbol maps sampled target points
    /// into the source space.
    pub fn new(
        weight: ScalarFunc,
        symbol: Symbol,
        source: MetricSpace,
        target: MetricSpace,
    ) -> Result<Self> {
        if weight.domain().id() != target.id() {
            return Err(Error::SpaceMismatch);
        }
        for y in target.sample_points(SPOT_CHECK_BUDGET, 0x5eed) {
            let image = symbol.apply(y.coords());
            source.point(image.clone()).map_err(|e| {
                Error::OutsideDomain(format!(
                    "symbol sends {:?} to {image:?} outside the source space: {e}",
                    y.coords()
                ))
            })?;
        }
        Ok(WCOperator {
            weight,
            symbol,
            source,
            target,
        })
    }

    pub fn weight(&self) -> &ScalarFunc {
        &self.weight
    }

    pub fn symbol(&self) -> &Symbol {
        &self.symbol
    }

    pub fn source(&self) -> &MetricSpace {
        &self.source
    }

    pub fn target(&self) -> &MetricSpace {
        &self.target
    }

    /// `(Tf)(y) = weight(y) * f(symbol(y))`.
    pub fn apply(&self, f: &ScalarFunc) -> Result<ScalarFunc> {
        if f.domain().id() != self.source.id() {
            return Err(Error::SpaceMismatch);
        }
        let weight = self.weight.clone();
        let symbol = self.symbol.clone();
        let inner = f.clone();
        Ok(ScalarFunc::new(
            format!("T[{}]", f.label()),
            self.target.clone(),
            move |y| weight.eval_coords(y) * inner.eval_coords(&symbol.apply(y)),
        ))
    }

    /// If the weight is constant (within [`EXACT_TOL`]) and nonvanishing,
    /// return it.
    pub fn constant_weight(&self, seed: u64) -> Option<f64> {
        let samples = self.target.sample_points(SPOT_CHECK_BUDGET, seed);
        let values: Vec<f64> = samples
            .iter()
            .map(|y| self.weight.eval_coords(y.coords()))
            .collect();
        let first = values[0];
        if values.iter().all(|v| (v - first).abs() <= EXACT_TOL) && first.abs() > WEIGHT_FLOOR {
            Some(first)
        } else {
            None
        }
    }

    pub fn to_json(&self) -> Json {
        Json::obj([
            ("weight", Json::str(self.weight.label())),
            ("symbol", self.symbol.to_json()),
            ("source", self.source.to_json()),
            ("target", self.target.to_json()),
        ])
    }
}

type ActionFn = Arc<dyn Fn(&ScalarFunc) -> ScalarFunc + Send + Sync>;

/// An opaque linear map between function spaces, known only through its
/// action on functions.
#[derive(Clone)]
pub struct BlackBoxOperator {
    label: String,
    action: ActionFn,
    source: MetricSpace,
    target: MetricSpace,
}

impl std::fmt::Debug for BlackBoxOperator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "BlackBoxOperator({})", self.label)
    }
}

impl BlackBoxOperator {
    pub fn new(
        label: impl Into<String>,
        source: MetricSpace,
        target: MetricSpace,
        action: impl Fn(&ScalarFunc) -> ScalarFunc + Send + Sync + 'static,
    ) -> Self {
        BlackBoxOperator {
            label: label.into(),
            action: Arc::new(action),
            source,
            target,
        }
    }

    /// Wrap a weighted composition operator as a black box (for consistency
    /// testing against the signature it should certainly have).
    pub fn from_wco(op: &WCOperator) -> Self {
        let inner = op.clone();
        BlackBoxOperator {
            label: format!("wco[h={}, phi={}]", op.weight.label(), op.symbol.label()),
            action: Arc::new(move |f| inner.apply(f).expect("source domain checked by caller")),
            source: op.source.clone(),
            target: op.target.clone(),
        }
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn source(&self) -> &MetricSpace {
        &self.source
    }

    pub fn target(&self) -> &MetricSpace {
        &self.target
    }

    pub fn apply(&self, f: &ScalarFunc) -> ScalarFunc {
        (self.action)(f)
    }

    /// Spot-check linearity on samples: `T(f+g) = Tf + Tg` and
    /// `T(cf) = c Tf` pointwise within [`EXACT_TOL`].
    pub fn check_linearity(&self, f: &ScalarFunc, g: &ScalarFunc, seed: u64) -> Result<()> {
        let sum = f.add(g)?;
        let t_sum = self.apply(&sum);
        let t_f = self.apply(f);
        let t_g = self.apply(g);
        let scaled = f.scale(2.5);
        let t_scaled = self.apply(&scaled);
        for y in self.target.sample_points(SPOT_CHECK_BUDGET, seed) {
            let lhs_add = t_sum.eval_coords(y.coords());
            let rhs_add = t_f.eval_coords(y.coords()) + t_g.eval_coords(y.coords());
            if (lhs_add - rhs_add).abs() > EXACT_TOL {
                return Err(Error::Degenerate(format!(
                    "operator {} is not additive at {:?}: {lhs_add} vs {rhs_add}",
                    self.label,
                    y.coords()
                )));
            }
            let lhs_scale = t_scaled.eval_coords(y.coords());
            let rhs_scale = 2.5 * t_f.eval_coords(y.coords());
            if (lhs_scale - rhs_scale).abs() > EXACT_TOL {
                return Err(Error::Degenerate(format!(
                    "operator {} is not homogeneous at {:?}",
                    self.label,
                    y.coords()
                )));
            }
        }
        Ok(())
    }
}

/// The counterexample operator `Tf = f + f(x0)`: linear, bijective, preserves
/// global Lipschitz constants exactly (it only adds a constant), yet carries
/// no weighted composition form.
pub fn shift_preserver(x0: &Point, space: &MetricSpace) -> Result<BlackBoxOperator> {
    if x0.space_id() != space.id() {
        return Err(Error::SpaceMismatch);
    }
    let anchor = x0.coords().to_vec();
    let label = format!("shift@{anchor:?}");
    Ok(BlackBoxOperator::new(
        label,
        space.clone(),
        space.clone(),
        move |f| {
            let value_at_anchor = f.eval_coords(&anchor);
            let inner = f.clone();
            ScalarFunc::new(
                format!("({} + {value_at_anchor})", f.label()),
                inner.domain().clone(),
                move |x| inner.eval_coords(x) + value_at_anchor,
            )
        },
    ))
}

/// Either kind of operator, for preservation checking.
#[derive(Debug, Clone)]
pub enum CheckedOperator {
    Wco(WCOperator),
    BlackBox(BlackBoxOperator),
}

impl CheckedOperator {
    fn source(&self) -> &MetricSpace {
        match self {
            CheckedOperator::Wco(op) => &op.source,
            CheckedOperator::BlackBox(op) => &op.source,
        }
    }
}

/// One corpus function's comparison: estimate for `Tf` (lhs) against the
/// matched estimate for `f` (rhs).
#[derive(Debug, Clone)]
pub struct FunctionDeviation {
    pub label: String,
    pub lhs: f64,
    pub rhs: f64,
    pub deviation: f64,
    pub at: Option<Point>,
}

/// Outcome of a preservation check over a corpus.
#[derive(Debug, Clone)]
pub struct PreservationReport {
    pub kind: EstimateKind,
    pub per_function: Vec<FunctionDeviation>,
    pub max_deviation: f64,
    pub tolerance: f64,
    pub verdict: bool,
    /// Worst-deviation witness: function label and base point if any.
    pub witness: Option<(String, Option<Point>)>,
}

impl PreservationReport {
    pub fn to_json(&self) -> Json {
        Json::obj([
            ("kind", Json::str(self.kind.as_str())),
            (
                "per_function",
                Json::arr(self.per_function.iter().map(|d| {
                    Json::obj([
                        ("function", Json::str(d.label.clone())),
                        ("lhs", Json::Float(d.lhs)),
                        ("rhs", Json::Float(d.rhs)),
                        ("deviation", Json::Float(d.deviation)),
                        (
                            "at",
                            match &d.at {
                                Some(p) => p.to_json(),
                                None => Json::Null,
                            },
                        ),
                    ])
                })),
            ),
            ("max_deviation", Json::Float(self.max_deviation)),
            ("tolerance", Json::Float(self.tolerance)),
            ("verdict", Json::Bool(self.verdict)),
            (
                "witness",
                match &self.witness {
                    Some((label, at)) => Json::obj([
                        ("function", Json::str(label.clone())),
                        (
                            "at",
                            match at {
                                Some(p) => p.to_json(),
                                None => Json::Null,
                            },
                        ),
                    ]),
                    None => Json::Null,
                },
            ),
        ])
    }
}

/// Deviation of `lhs` from the reference `rhs`, relative where the reference
/// is meaningfully nonzero.
fn relative_deviation(lhs: f64, rhs: f64) -> f64 {
    let diff = (lhs - rhs).abs();
    if rhs.abs() > 1e-12 {
        diff / rhs.abs()
    } else {
        diff
    }
}

/// Compare Lipschitz constants of `f` and `Tf` over a corpus.
///
/// Global kind compares `L(Tf)` with `L(f)`; local/pointwise kinds compare
/// `L_p(Tf)` with `L_{phi(p)}(f)` at each panel point (sampled in the target
/// space when no panel is supplied). All estimates share the seed in `cfg`,
/// and for weighted composition operators the `f`-side quotients are taken
/// over the *images* of the `Tf`-side sample pairs, so operators that
/// preserve constants exactly cancel sampling error entirely.
pub fn preservation_check(
    op: &CheckedOperator,
    corpus: &[ScalarFunc],
    kind: EstimateKind,
    cfg: &EstimatorConfig,
    tol: f64,
    panel: Option<&[Point]>,
) -> Result<PreservationReport> {
    if corpus.is_empty() {
        return Err(Error::InvalidConfig("corpus must be nonempty".into()));
    }
    for f in corpus {
        if f.domain().id() != op.source().id() {
            return Err(Error::SpaceMismatch);
        }
    }
    let per_function = match (op, kind) {
        (CheckedOperator::Wco(op), EstimateKind::Global) => global_paired_wco(op, corpus, cfg)?,
        (CheckedOperator::Wco(op), _) => local_paired_wco(op, corpus, kind, cfg, panel)?,
        (CheckedOperator::BlackBox(op), EstimateKind::Global) => {
            global_blackbox(op, corpus, cfg)?
        }
        (CheckedOperator::BlackBox(_), _) => {
            return Err(Error::Unsupported(
                "local/pointwise preservation checks need a symbol to match base points; \
                 black-box operators support the global kind only"
                    .into(),
            ));
        }
    };
    let mut max_deviation = 0.0f64;
    let mut witness = None;
    for d in &per_function {
        if d.deviation >= max_deviation {
            max_deviation = d.deviation;
            witness = Some((d.label.clone(), d.at.clone()));
        }
    }
    let verdict = max_deviation <= tol;
    Ok(PreservationReport {
        kind,
        per_function,
        max_deviation,
        tolerance: tol,
        verdict,
        witness: if verdict { None } else { witness },
    })
}

fn global_paired_wco(
    op: &WCOperator,
    corpus: &[ScalarFunc],
    cfg: &EstimatorConfig,
) -> Result<Vec<FunctionDeviation>> {
    let pts = op.target.sample_points(2 * cfg.pairs_per_stage, cfg.seed);
    let images: Vec<Vec<f64>> = pts.iter().map(|y| op.symbol.apply(y.coords())).collect();
    let weights: Vec<f64> = pts
        .iter()
        .map(|y| op.weight.eval_coords(y.coords()))
        .collect();
    let mut out = Vec::with_capacity(corpus.len());
    for f in corpus {
        let mut lhs_sup = 0.0f64;
        let mut rhs_sup = 0.0f64;
        for i in 0..cfg.pairs_per_stage {
            let (u, v) = (2 * i, 2 * i + 1);
            let fu = f.eval_coords(&images[u]);
            let fv = f.eval_coords(&images[v]);
            let dy = op
                .target
                .distance_coords(pts[u].coords(), pts[v].coords());
            if dy > 0.0 {
                lhs_sup = lhs_sup.max((weights[u] * fu - weights[v] * fv).abs() / dy);
            }
            let dx = op.source.distance_coords(&images[u], &images[v]);
            if dx > 0.0 {
                rhs_sup = rhs_sup.max((fu - fv).abs() / dx);
            }
        }
        out.push(FunctionDeviation {
            label: f.label().to_owned(),
            lhs: lhs_sup,
            rhs: rhs_sup,
            deviation: relative_deviation(lhs_sup, rhs_sup),
            at: None,
        });
    }
    Ok(out)
}

fn local_paired_wco(
    op: &WCOperator,
    corpus: &[ScalarFunc],
    kind: EstimateKind,
    cfg: &EstimatorConfig,
    panel: Option<&[Point]>,
) -> Result<Vec<FunctionDeviation>> {
    let default_panel;
    let panel: &[Point] = match panel {
        Some(p) => p,
        None => {
            default_panel = op.target.sample_points(5, cfg.seed.wrapping_add(1));
            &default_panel
        }
    };
    // The compared value is the stage sup at the smallest radius, exactly
    // what the local/pointwise estimators report as their value; earlier
    // stages would not enter the comparison.
    let k = cfg.radii.len() - 1;
    let eps = cfg.radii[k];
    let stage_seed = cfg.seed ^ (k as u64);
    let n_points = match kind {
        EstimateKind::Local => 2 * cfg.pairs_per_stage,
        _ => cfg.pairs_per_stage,
    };
    let mut out = Vec::new();
    for p in panel {
        if p.space_id() != op.target.id() {
            return Err(Error::SpaceMismatch);
        }
        let image_p = op.symbol.apply(p.coords());
        let ball = op.target.sample_ball(p, eps, n_points, stage_seed)?;
        let images: Vec<Vec<f64>> = ball.iter().map(|y| op.symbol.apply(y.coords())).collect();
        let weights: Vec<f64> = ball
            .iter()
            .map(|y| op.weight.eval_coords(y.coords()))
            .collect();
        for f in corpus {
            let (mut lhs, mut rhs) = (0.0f64, 0.0f64);
            match kind {
                EstimateKind::Local => {
                    for i in 0..cfg.pairs_per_stage {
                        let (u, v) = (2 * i, 2 * i + 1);
                        let dy = op
                            .target
                            .distance_coords(ball[u].coords(), ball[v].coords());
                        let (fu, fv) = (f.eval_coords(&images[u]), f.eval_coords(&images[v]));
                        if dy > 0.0 {
                            lhs = lhs.max((weights[u] * fu - weights[v] * fv).abs() / dy);
                        }
                        let dx = op.source.distance_coords(&images[u], &images[v]);
                        if dx > 0.0 {
                            rhs = rhs.max((fu - fv).abs() / dx);
                        }
                    }
                }
                EstimateKind::Pointwise => {
                    let fp = f.eval_coords(&image_p);
                    let tfp = op.weight.eval_coords(p.coords()) * fp;
                    for (i, y) in ball.iter().enumerate() {
                        let dy = op.target.distance_coords(y.coords(), p.coords());
                        let fy = f.eval_coords(&images[i]);
                        if dy > 0.0 {
                            lhs = lhs.max((weights[i] * fy - tfp).abs() / dy);
                        }
                        let dx = op.source.distance_coords(&images[i], &image_p);
                        if dx > 0.0 {
                            rhs = rhs.max((fy - fp).abs() / dx);
                        }
                    }
                }
                EstimateKind::Global => unreachable!(),
            }
            out.push(FunctionDeviation {
                label: format!("{}@{:?}", f.label(), p.coords()),
                lhs,
                rhs,
                deviation: relative_deviation(lhs, rhs),
                at: Some(p.clone()),
            });
        }
    }
    Ok(out)
}

fn global_blackbox(
    op: &BlackBoxOperator,
    corpus: &[ScalarFunc],
    cfg: &EstimatorConfig,
) -> Result<Vec<FunctionDeviation>> {
    let same_space = op.source.id() == op.target.id();
    let target_pts = op.target.sample_points(2 * cfg.pairs_per_stage, cfg.seed);
    let source_pts = if same_space {
        target_pts.clone()
    } else {
        op.source.sample_points(2 * cfg.pairs_per_stage, cfg.seed)
    };
    let mut out = Vec::with_capacity(corpus.len());
    for f in corpus {
        let tf = op.apply(f);
        let mut lhs_sup = 0.0f64;
        let mut rhs_sup = 0.0f64;
        for i in 0..cfg.pairs_per_stage {
            let (u, v) = (2 * i, 2 * i + 1);
            let dy = op
                .target
                .distance_coords(target_pts[u].coords(), target_pts[v].coords());
            if dy > 0.0 {
                lhs_sup = lhs_sup.max(
                    (tf.eval_coords(target_pts[u].coords())
                        - tf.eval_coords(target_pts[v].coords()))
                    .abs()
                        / dy,
                );
            }
            let dx = op
                .source
                .distance_coords(source_pts[u].coords(), source_pts[v].coords());
            if dx > 0.0 {
                rhs_sup = rhs_sup.max(
                    (f.eval_coords(source_pts[u].coords())
                        - f.eval_coords(source_pts[v].coords()))
                    .abs()
                        / dx,
                );
            }
        }
        out.push(FunctionDeviation {
            label: f.label().to_owned(),
            lhs: lhs_sup,
            rhs: rhs_sup,
            deviation: relative_deviation(lhs_sup, rhs_sup),
            at: None,
        });
    }
    Ok(out)
}

/// Outcome of probing a black-box operator for the weighted-composition
/// signature.
#[derive(Debug, Clone)]
pub enum ConsistencyOutcome {
    /// Every corpus function agrees at the recovered preimages.
    Consistent,
    /// A witness disagreement: `|Tf(y)/h(y) - f(phi_hat(y))| > tol`.
    Inconsistent {
        witness_label: String,
        at: Point,
        expected: f64,
        observed: f64,
    },
    /// The signature test does not apply (vanishing weight, unsupported
    /// domain kind); reported, not a crash.
    Inapplicable { reason: String },
}

impl ConsistencyOutcome {
    pub fn to_json(&self) -> Json {
        match self {
            ConsistencyOutcome::Consistent => Json::obj([
                ("consistent", Json::Bool(true)),
                ("witness", Json::Null),
            ]),
            ConsistencyOutcome::Inconsistent {
                witness_label,
                at,
                expected,
                observed,
            } => Json::obj([
                ("consistent", Json::Bool(false)),
                (
                    "witness",
                    Json::obj([
                        ("function", Json::str(witness_label.clone())),
                        ("at", at.to_json()),
                        ("expected", Json::Float(*expected)),
                        ("observed", Json::Float(*observed)),
                    ]),
                ),
            ]),
            ConsistencyOutcome::Inapplicable { reason } => Json::obj([
                ("consistent", Json::Null),
                ("inapplicable", Json::str(reason.clone())),
            ]),
        }
    }
}

/// Test whether a black-box linear operator behaves like `Tf = h * (f o phi)`
/// for *some* single point map `phi`.
///
/// With `h := T(1)`, candidate preimages `phi_hat(y)` are recovered from cone
/// probes `f_q = min(d(., q), cap)` — a true weighted composition sends these
/// to exact distance readings `d(phi(y), q)`, so `n + 3` anchor distances
/// pin `phi_hat(y)` by least-squares multilateration on Euclidean domains
/// (finite sets take the argmin over elements instead). Every corpus function
/// must then agree: `Tf(y)/h(y) = f(phi_hat(y))` within `tol`.
pub fn wco_consistency_check(
    op: &BlackBoxOperator,
    corpus: &[ScalarFunc],
    cfg: &EstimatorConfig,
    tol: f64,
) -> Result<ConsistencyOutcome> {
    let x_space = &op.source;
    let y_space = &op.target;

    // Linearity is a precondition of the signature test.
    let probe_f = ScalarFunc::coordinate(0, x_space)?;
    let probe_g = ScalarFunc::constant(0.75, x_space);
    op.check_linearity(&probe_f, &probe_g, cfg.seed)?;

    // h = T(1): exactly the weight when T is a weighted composition.
    let one = ScalarFunc::constant(1.0, x_space);
    let h = op.apply(&one);

    let y_samples = y_space.sample_points(SPOT_CHECK_BUDGET.min(cfg.pairs_per_stage.max(8)), cfg.seed);
    for y in &y_samples {
        if h.eval_coords(y.coords()).abs() < WEIGHT_FLOOR {
            return Ok(ConsistencyOutcome::Inapplicable {
                reason: format!(
                    "T(1) vanishes at {:?}; the weighted-composition signature cannot be probed",
                    y.coords()
                ),
            });
        }
    }

    let cap = x_space.diameter_bound().map(|d| d + 1.0).unwrap_or(1e6);
    let anchors: Vec<Point> = x_space.sample_points(x_space.dim() + 3, cfg.seed ^ 0xA17C);
    let cone_probes: Vec<ScalarFunc> = anchors
        .iter()
        .map(|q| crate::func::cone_function(q, cap, x_space))
        .collect::<Result<_>>()?;
    let probe_images: Vec<ScalarFunc> = cone_probes.iter().map(|f| op.apply(f)).collect();

    let recover = |y: &Point| -> Result<Option<Vec<f64>>> {
        let hy = h.eval_coords(y.coords());
        let readings: Vec<f64> = probe_images
            .iter()
            .map(|tf| tf.eval_coords(y.coords()) / hy)
            .collect();
        match x_space.kind() {
            crate::metric::SpaceKind::FiniteSet { points } => {
                // Probe every element: the candidate is the one the cone
                // readings place at distance ~0.
                let mut best: Option<(f64, &Vec<f64>)> = None;
                for pt in points {
                    let score: f64 = anchors
                        .iter()
                        .zip(&readings)
                        .map(|(q, r)| {
                            (x_space.distance_coords(pt, q.coords()) - r).abs()
                        })
                        .sum();
                    if best.map(|(s, _)| score < s).unwrap_or(true) {
                        best = Some((score, pt));
                    }
                }
                Ok(best.map(|(_, p)| p.clone()))
            }
            _ if x_space.is_euclidean_flat() => {
                // Multilateration: ||z - q_j||^2 - ||z - q_0||^2 is linear in z.
                let n = x_space.dim();
                let q0 = anchors[0].coords();
                let r0 = readings[0];
                let rows = anchors.len() - 1;
                let mut a = DMatrix::zeros(rows, n);
                let mut rhs = DVector::zeros(rows);
                for j in 1..anchors.len() {
                    let qj = anchors[j].coords();
                    let norm_q0: f64 = q0.iter().map(|c| c * c).sum();
                    let norm_qj: f64 = qj.iter().map(|c| c * c).sum();
                    for k in 0..n {
                        a[(j - 1, k)] = 2.0 * (q0[k] - qj[k]);
                    }
                    rhs[j - 1] = readings[j] * readings[j] - r0 * r0 - norm_qj + norm_q0;
                }
                let svd = a.svd(true, true);
                let solution = svd
                    .solve(&rhs, 1e-12)
                    .map_err(|e| Error::Degenerate(format!("multilateration failed: {e}")))?;
                Ok(Some(solution.iter().copied().collect()))
            }
            _ => Ok(None),
        }
    };

    for y in &y_samples {
        let candidate = match recover(y)? {
            Some(z) => z,
            None => {
                return Ok(ConsistencyOutcome::Inapplicable {
                    reason: format!(
                        "preimage recovery is not implemented for source kind {:?}",
                        x_space.kind()
                    ),
                })
            }
        };
        let hy = h.eval_coords(y.coords());
        for f in corpus.iter().chain(cone_probes.iter()) {
            let observed = op.apply(f).eval_coords(y.coords()) / hy;
            let expected = f.eval_coords(&candidate);
            if (observed - expected).abs() > tol {
                return Ok(ConsistencyOutcome::Inconsistent {
                    witness_label: f.label().to_owned(),
                    at: y.clone(),
                    expected,
                    observed,
                });
            }
        }
    }
    Ok(ConsistencyOutcome::Consistent)
}

/// A sampled pair certifying that the symbol stretches some distance beyond
/// the factor the weight implies, together with the witness function whose
/// image has a quotient exceeding 1.
#[derive(Debug, Clone)]
pub struct ViolationWitness {
    pub p: Point,
    pub q: Point,
    pub witness: ScalarFunc,
    /// `|T f~(p) - T f~(q)| / d_Y(p, q)`; exceeds 1 for a genuine violation.
    pub quotient: f64,
    pub alpha: f64,
}

/// Search sampled pairs for `d_X(phi p, phi q) > alpha * d_Y(p, q) * (1+tol)`
/// where `alpha = 1/|h|` comes from the constant weight. On success, the
/// returned witness function `f~ = min(d(., phi p), d(phi p, phi q))` has
/// `L(f~) = 1` while the single quotient of `T f~` at `(p, q)` exceeds 1,
/// certifying non-preservation. Returns `None` when no violating pair is
/// found at the budget; errors when the weight is not a nonzero constant.
pub fn dilation_violation_witness(
    op: &WCOperator,
    cfg: &EstimatorConfig,
    tol: f64,
) -> Result<Option<ViolationWitness>> {
    let w = op.constant_weight(cfg.seed).ok_or_else(|| {
        Error::Unsupported(
            "violation search needs a constant nonvanishing weight to infer alpha".into(),
        )
    })?;
    let alpha = 1.0 / w.abs();
    let pts = op.target.sample_points(2 * cfg.pairs_per_stage, cfg.seed);
    let mut best: Option<(usize, usize, f64)> = None;
    for i in 0..cfg.pairs_per_stage {
        let (u, v) = (2 * i, 2 * i + 1);
        let dy = op
            .target
            .distance_coords(pts[u].coords(), pts[v].coords());
        if dy == 0.0 {
            continue;
        }
        let dx = op.source.distance_coords(
            &op.symbol.apply(pts[u].coords()),
            &op.symbol.apply(pts[v].coords()),
        );
        let ratio = dx / dy;
        if ratio > alpha * (1.0 + tol) && best.map(|(_, _, r)| ratio > r).unwrap_or(true) {
            best = Some((u, v, ratio));
        }
    }
    let Some((u, v, _)) = best else {
        return Ok(None);
    };
    let phi_p = op.source.point(op.symbol.apply(pts[u].coords()))?;
    let phi_q = op.source.point(op.symbol.apply(pts[v].coords()))?;
    let witness = witness_function(&phi_p, &phi_q, &op.source)?;
    let t_witness = op.apply(&witness)?;
    let dy = op
        .target
        .distance_coords(pts[u].coords(), pts[v].coords());
    let quotient = (t_witness.eval_coords(pts[u].coords())
        - t_witness.eval_coords(pts[v].coords()))
    .abs()
        / dy;
    Ok(Some(ViolationWitness {
        p: pts[u].clone(),
        q: pts[v].clone(),
        witness,
        quotient,
        alpha,
    }))
}
