//! Flat quotient manifolds as atlases with orthogonal transition Jacobians.
//!
//! Shipped manifolds are the quotients `R/Z` and `R^n/Z^n`: their charts are
//! rigid motions of the covering space, so the orthogonal-transition
//! condition is machine checkable, and chart-based pointwise constants can
//! be cross-checked against the quotient geodesic metric. The unit sphere is
//! deliberately *not* an atlas here; it is exercised as a geodesic metric
//! space instead (see `metric`), since everywhere-orthogonal transitions
//! cannot hold on a curved surface.

use crate::error::{Error, Result};
use crate::func::ScalarFunc;
use crate::lipest::{pointwise_lip, EstimatorConfig, LipEstimate};
use crate::metric::{euclid_dist, euclid_norm, MetricSpace, Point};
use crate::report::Json;
use nalgebra::{DMatrix, DVector};
use std::sync::Arc;

/// Chart radius for unit quotients: below half the injectivity radius, so
/// inverses are single-valued.
pub const CHART_RADIUS: f64 = 0.4;
/// Source charts are shrunk to this radius in the isometry check so that
/// images of chart neighborhoods stay inside one target chart.
pub const SOURCE_CHART_RADIUS: f64 = 0.15;
/// Step for finite-difference transition Jacobians.
const JACOBIAN_STEP: f64 = 1e-5;

/// Supported quotient manifolds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ManifoldKind {
    /// R/Z.
    Circle,
    /// R^n/Z^n.
    Torus,
}

impl ManifoldKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ManifoldKind::Circle => "circle",
            ManifoldKind::Torus => "torus",
        }
    }
}

/// A chart `forward: B(0, radius) -> M`, `forward(u) = wrap(base + F u)`,
/// centered at its base point (`forward(0) = base`).
#[derive(Debug, Clone)]
pub struct Chart {
    base: Vec<f64>,
    frame: DMatrix<f64>,
    frame_inv: DMatrix<f64>,
    radius: f64,
}

impl Chart {
    fn new(base: Vec<f64>, frame: DMatrix<f64>, radius: f64) -> Result<Self> {
        let frame_inv = frame
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::Degenerate("chart frame is singular".into()))?;
        Ok(Chart {
            base,
            frame,
            frame_inv,
            radius,
        })
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn base(&self) -> &[f64] {
        &self.base
    }

    /// Manifold point for a chart coordinate.
    pub fn forward(&self, u: &[f64]) -> Vec<f64> {
        let v = &self.frame * DVector::from_column_slice(u);
        self.base
            .iter()
            .zip(v.iter())
            .map(|(b, d)| wrap_unit(b + d))
            .collect()
    }

    /// Chart coordinate of a manifold point, when it lies in this chart's
    /// patch (unique lift within half a period and inside the domain ball).
    pub fn inverse(&self, m: &[f64]) -> Option<Vec<f64>> {
        let lift: Vec<f64> = m
            .iter()
            .zip(&self.base)
            .map(|(x, b)| signed_diff(*x, *b))
            .collect();
        if !lift.iter().all(|d| d.abs() < 0.5) {
            return None;
        }
        let u = &self.frame_inv * DVector::from_column_slice(&lift);
        let u: Vec<f64> = u.iter().copied().collect();
        if euclid_norm(&u) < self.radius {
            Some(u)
        } else {
            None
        }
    }
}

/// An atlas for a flat quotient manifold. `frames` lists the linear parts
/// available for charts; `chart_at` uses the first, the rest feed the
/// chart-independence and transition checks. Quotient atlas frames are
/// orthogonal; [`Atlas::sheared_fixture`] deliberately is not.
#[derive(Debug, Clone)]
pub struct Atlas {
    kind: ManifoldKind,
    dim: usize,
    frames: Vec<DMatrix<f64>>,
    chart_radius: f64,
}

impl Atlas {
    /// R/Z with an identity chart and a reflected alternate chart.
    pub fn circle() -> Self {
        Atlas {
            kind: ManifoldKind::Circle,
            dim: 1,
            frames: vec![DMatrix::identity(1, 1), DMatrix::from_element(1, 1, -1.0)],
            chart_radius: CHART_RADIUS,
        }
    }

    /// R^n/Z^n with an identity chart and, in dimension 2, a rotated
    /// alternate chart (an axis reflection otherwise).
    pub fn torus(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidConfig("dimension must be at least 1".into()));
        }
        let alternate = if dim == 2 {
            let th = 30f64.to_radians();
            DMatrix::from_row_slice(2, 2, &[th.cos(), -th.sin(), th.sin(), th.cos()])
        } else {
            let mut m = DMatrix::identity(dim, dim);
            m[(0, 0)] = -1.0;
            m
        };
        Ok(Atlas {
            kind: ManifoldKind::Torus,
            dim,
            frames: vec![DMatrix::identity(dim, dim), alternate],
            chart_radius: CHART_RADIUS,
        })
    }

    /// Adversarial fixture: a 2-torus atlas whose alternate chart is sheared
    /// by `shear`, violating the orthogonal-transition condition by about
    /// that much.
    pub fn sheared_fixture(shear: f64) -> Self {
        Atlas {
            kind: ManifoldKind::Torus,
            dim: 2,
            frames: vec![
                DMatrix::identity(2, 2),
                DMatrix::from_row_slice(2, 2, &[1.0, shear, 0.0, 1.0]),
            ],
            chart_radius: CHART_RADIUS,
        }
    }

    pub fn kind(&self) -> ManifoldKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn frames(&self) -> usize {
        self.frames.len()
    }

    /// The quotient metric space underlying this atlas.
    pub fn space(&self) -> MetricSpace {
        match self.kind {
            ManifoldKind::Circle => MetricSpace::circle(),
            ManifoldKind::Torus => MetricSpace::torus(self.dim).expect("validated at construction"),
        }
    }

    /// Chart centered at `p` using the primary frame.
    pub fn chart_at(&self, p: &Point) -> Result<Chart> {
        self.chart_with(p, 0, self.chart_radius)
    }

    /// Chart centered at `p` with an explicit frame index and radius.
    pub fn chart_with(&self, p: &Point, frame: usize, radius: f64) -> Result<Chart> {
        if p.space_id() != self.space().id() {
            return Err(Error::SpaceMismatch);
        }
        let f = self.frames.get(frame).ok_or_else(|| {
            Error::InvalidConfig(format!(
                "frame index {frame} out of range ({} frames)",
                self.frames.len()
            ))
        })?;
        Chart::new(p.coords().to_vec(), f.clone(), radius)
    }

    pub fn to_json(&self) -> Json {
        Json::obj([
            ("manifold", Json::str(self.kind.as_str())),
            ("dim", Json::from(self.dim)),
            ("charts", Json::from(self.frames.len())),
            ("chart_radius", Json::Float(self.chart_radius)),
        ])
    }
}

fn wrap_unit(x: f64) -> f64 {
    let w = x - x.floor();
    if w >= 1.0 {
        0.0
    } else {
        w
    }
}

/// Signed representative of `x - b` modulo 1 in `[-0.5, 0.5]`.
fn signed_diff(x: f64, b: f64) -> f64 {
    let d = x - b;
    d - d.round()
}

/// Result of sampling transition-map Jacobians across chart overlaps.
#[derive(Debug, Clone)]
pub struct TransitionReport {
    /// Max orthogonality defect `max|J^T J - I|` over sampled overlap points.
    pub max_defect: f64,
    pub samples: usize,
    pub tolerance: f64,
    pub pass: bool,
}

impl TransitionReport {
    pub fn to_json(&self) -> Json {
        Json::obj([
            ("max_defect", Json::Float(self.max_defect)),
            ("samples", Json::from(self.samples)),
            ("tolerance", Json::Float(self.tolerance)),
            ("pass", Json::Bool(self.pass)),
        ])
    }
}

/// Sample overlapping chart pairs (all frame combinations, nearby base
/// points) and report the worst finite-difference orthogonality defect of
/// the transition maps.
pub fn transition_orthogonality_check(
    atlas: &Atlas,
    n_samples: usize,
    seed: u64,
    tol: f64,
) -> Result<TransitionReport> {
    if n_samples == 0 {
        return Err(Error::InvalidConfig("need at least one sample".into()));
    }
    let space = atlas.space();
    let dim = atlas.dim();
    let bases = space.sample_points(n_samples, seed);
    // Chart-domain points to probe, well inside the overlap.
    let probe_ball = MetricSpace::open_ball(vec![0.0; dim], 0.05)?;
    let probes = probe_ball.sample_points(4, seed ^ 0x7A);

    let mut max_defect = 0.0f64;
    let mut checked = 0usize;
    for p in &bases {
        // A nearby second base point: overlap is guaranteed at offset 0.1.
        let mut q_coords = p.coords().to_vec();
        q_coords[0] = wrap_unit(q_coords[0] + 0.1);
        let q = space.point(q_coords)?;
        for fa in 0..atlas.frames() {
            for fb in 0..atlas.frames() {
                let from = atlas.chart_with(p, fa, atlas.chart_radius)?;
                let to = atlas.chart_with(&q, fb, atlas.chart_radius)?;
                let transition = |v: &[f64]| -> Option<Vec<f64>> { to.inverse(&from.forward(v)) };
                for u in &probes {
                    if transition(u.coords()).is_none() {
                        continue;
                    }
                    let jac = match fd_jacobian(&transition, u.coords(), dim) {
                        Some(j) => j,
                        None => continue,
                    };
                    max_defect = max_defect.max(orthogonality_defect(&jac));
                    checked += 1;
                }
            }
        }
    }
    if checked == 0 {
        return Err(Error::Degenerate(
            "no chart overlap found at the sampling budget".into(),
        ));
    }
    Ok(TransitionReport {
        max_defect,
        samples: checked,
        tolerance: tol,
        pass: max_defect <= tol,
    })
}

fn fd_jacobian(
    map: &dyn Fn(&[f64]) -> Option<Vec<f64>>,
    u: &[f64],
    dim: usize,
) -> Option<DMatrix<f64>> {
    let mut jac = DMatrix::zeros(dim, dim);
    let mut stencil = u.to_vec();
    for k in 0..dim {
        stencil[k] = u[k] + JACOBIAN_STEP;
        let plus = map(&stencil)?;
        stencil[k] = u[k] - JACOBIAN_STEP;
        let minus = map(&stencil)?;
        stencil[k] = u[k];
        for r in 0..dim {
            jac[(r, k)] = (plus[r] - minus[r]) / (2.0 * JACOBIAN_STEP);
        }
    }
    Some(jac)
}

fn orthogonality_defect(j: &DMatrix<f64>) -> f64 {
    let gram = j.transpose() * j;
    let mut defect = 0.0f64;
    for i in 0..gram.nrows() {
        for k in 0..gram.ncols() {
            let target = if i == k { 1.0 } else { 0.0 };
            defect = defect.max((gram[(i, k)] - target).abs());
        }
    }
    defect
}

/// Pointwise Lipschitz constant of `f` at `p` computed through the chart at
/// `p`: the pointwise constant of `f o forward` at 0 in the flat chart
/// domain.
pub fn pt_lip_on_manifold(
    f: &ScalarFunc,
    p: &Point,
    atlas: &Atlas,
    cfg: &EstimatorConfig,
) -> Result<LipEstimate> {
    pt_lip_through_frame(f, p, atlas, 0, cfg)
}

fn pt_lip_through_frame(
    f: &ScalarFunc,
    p: &Point,
    atlas: &Atlas,
    frame: usize,
    cfg: &EstimatorConfig,
) -> Result<LipEstimate> {
    if f.domain().id() != atlas.space().id() {
        return Err(Error::SpaceMismatch);
    }
    let chart = atlas.chart_with(p, frame, atlas.chart_radius)?;
    let domain = MetricSpace::open_ball(vec![0.0; atlas.dim()], chart.radius())?;
    let inner = f.clone();
    let label = format!("{}.chart", f.label());
    let pulled_back = ScalarFunc::new(label, domain.clone(), move |u| {
        inner.eval_coords(&chart.forward(u))
    });
    let origin = domain.point(vec![0.0; atlas.dim()])?;
    pointwise_lip(&pulled_back, &origin, &domain, cfg)
}

/// Result of comparing the chart-based pointwise constant through two
/// distinct charts at the same base point.
#[derive(Debug, Clone)]
pub struct ChartIndependenceReport {
    pub value_primary: f64,
    pub value_alternate: f64,
    pub rel_gap: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl ChartIndependenceReport {
    pub fn to_json(&self) -> Json {
        Json::obj([
            ("value_primary", Json::Float(self.value_primary)),
            ("value_alternate", Json::Float(self.value_alternate)),
            ("rel_gap", Json::Float(self.rel_gap)),
            ("tolerance", Json::Float(self.tolerance)),
            ("pass", Json::Bool(self.pass)),
        ])
    }
}

/// The chart-based pointwise constant must not depend on the chart: compare
/// the primary and alternate frames at `p`.
pub fn chart_independence_check(
    f: &ScalarFunc,
    p: &Point,
    atlas: &Atlas,
    cfg: &EstimatorConfig,
    tol: f64,
) -> Result<ChartIndependenceReport> {
    if atlas.frames() < 2 {
        return Err(Error::InvalidConfig(
            "chart independence needs at least two frames".into(),
        ));
    }
    let v0 = pt_lip_through_frame(f, p, atlas, 0, cfg)?.value;
    let v1 = pt_lip_through_frame(f, p, atlas, 1, cfg)?.value;
    let scale = v0.max(v1);
    let rel_gap = if scale > 1e-12 {
        (v0 - v1).abs() / scale
    } else {
        0.0
    };
    Ok(ChartIndependenceReport {
        value_primary: v0,
        value_alternate: v1,
        rel_gap,
        tolerance: tol,
        pass: rel_gap <= tol,
    })
}

type PointMap = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;

/// A map between manifolds, given on quotient representatives.
#[derive(Clone)]
pub struct ManifoldMap {
    label: String,
    map: PointMap,
}

impl std::fmt::Debug for ManifoldMap {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "ManifoldMap({})", self.label)
    }
}

impl ManifoldMap {
    pub fn new(
        label: impl Into<String>,
        map: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
    ) -> Self {
        ManifoldMap {
            label: label.into(),
            map: Arc::new(map),
        }
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        (self.map)(x)
    }

    /// Named fixture maps: `translate`, `rotate90`, `shear`, `reflect`.
    /// Rotation and shear need a 2-torus; the others work on both manifolds.
    pub fn fixture(kind: ManifoldKind, name: &str) -> Result<ManifoldMap> {
        let torus_only = |what: &str| -> Result<()> {
            if kind != ManifoldKind::Torus {
                return Err(Error::InvalidConfig(format!(
                    "{what} is only defined on the 2-torus"
                )));
            }
            Ok(())
        };
        match (kind, name) {
            (ManifoldKind::Circle, "translate") => {
                Ok(ManifoldMap::new("translate", |x| vec![wrap_unit(x[0] + 0.3)]))
            }
            (ManifoldKind::Circle, "reflect") => {
                Ok(ManifoldMap::new("reflect", |x| vec![wrap_unit(-x[0])]))
            }
            (ManifoldKind::Torus, "translate") => Ok(ManifoldMap::new("translate", |x| {
                vec![wrap_unit(x[0] + 0.3), wrap_unit(x[1] + 0.1)]
            })),
            (ManifoldKind::Torus, "rotate90") => {
                torus_only("rotate90")?;
                Ok(ManifoldMap::new("rotate90", |x| {
                    vec![wrap_unit(-x[1]), wrap_unit(x[0])]
                }))
            }
            (ManifoldKind::Torus, "shear") => {
                torus_only("shear")?;
                Ok(ManifoldMap::new("shear", |x| {
                    vec![wrap_unit(x[0] + x[1]), wrap_unit(x[1])]
                }))
            }
            (ManifoldKind::Torus, "reflect") => Ok(ManifoldMap::new("reflect", |x| {
                vec![wrap_unit(x[1]), wrap_unit(x[0])]
            })),
            (_, other) => Err(Error::InvalidConfig(format!(
                "unknown fixture map `{other}` for {}",
                kind.as_str()
            ))),
        }
    }
}

/// Result of certifying a manifold map as a local isometry through induced
/// chart maps.
#[derive(Debug, Clone)]
pub struct IsometryReport {
    /// Max over sampled pairs of `| ||g(u)-g(v)|| / ||u-v|| - 1 |` for the
    /// induced maps `g = phi^-1 o sigma o psi`.
    pub max_deviation: f64,
    pub worst_base: Option<Point>,
    pub base_points: usize,
    pub pairs_per_point: usize,
    pub tolerance: f64,
    pub pass: bool,
}

impl IsometryReport {
    pub fn to_json(&self) -> Json {
        Json::obj([
            ("max_deviation", Json::Float(self.max_deviation)),
            (
                "worst_base",
                match &self.worst_base {
                    Some(p) => p.to_json(),
                    None => Json::Null,
                },
            ),
            ("base_points", Json::from(self.base_points)),
            ("pairs_per_point", Json::from(self.pairs_per_point)),
            ("tolerance", Json::Float(self.tolerance)),
            ("pass", Json::Bool(self.pass)),
        ])
    }
}

/// At sampled base points `p` of `source`, build the source chart at `p`
/// (shrunk to [`SOURCE_CHART_RADIUS`]) and the target chart at `sigma(p)`,
/// and verify that the induced map preserves Euclidean distances of chart
/// coordinates within `tol`.
pub fn local_isometry_check(
    sigma: &ManifoldMap,
    source: &Atlas,
    target: &Atlas,
    n_points: usize,
    pairs_per_point: usize,
    seed: u64,
    tol: f64,
) -> Result<IsometryReport> {
    if n_points == 0 || pairs_per_point == 0 {
        return Err(Error::InvalidConfig(
            "need at least one base point and one pair".into(),
        ));
    }
    if source.dim() != target.dim() {
        return Err(Error::DimensionMismatch {
            expected: source.dim(),
            got: target.dim(),
        });
    }
    let n_space = source.space();
    let m_space = target.space();
    let dim = source.dim();
    let bases = n_space.sample_points(n_points, seed);
    let pair_ball = MetricSpace::open_ball(vec![0.0; dim], SOURCE_CHART_RADIUS)?;

    let mut max_deviation = 0.0f64;
    let mut worst_base = None;
    for (bi, p) in bases.iter().enumerate() {
        let psi = source.chart_with(p, 0, SOURCE_CHART_RADIUS)?;
        let sigma_p = m_space.point(sigma.apply(p.coords()))?;
        let phi = target.chart_at(&sigma_p)?;
        let induced = |u: &[f64]| -> Result<Vec<f64>> {
            let image = sigma.apply(&psi.forward(u));
            phi.inverse(&image).ok_or_else(|| {
                Error::OutsideDomain(format!(
                    "sigma image of chart point {u:?} at base {:?} escapes the target chart",
                    p.coords()
                ))
            })
        };
        let pts = pair_ball.sample_points(2 * pairs_per_point, seed ^ ((bi as u64) << 8));
        for w in pts.chunks(2) {
            let du = euclid_dist(w[0].coords(), w[1].coords());
            if du == 0.0 {
                continue;
            }
            let gu = induced(w[0].coords())?;
            let gv = induced(w[1].coords())?;
            let dg = euclid_dist(&gu, &gv);
            let deviation = (dg / du - 1.0).abs();
            if deviation > max_deviation {
                max_deviation = deviation;
                worst_base = Some(p.clone());
            }
        }
    }
    Ok(IsometryReport {
        max_deviation,
        worst_base,
        base_points: n_points,
        pairs_per_point,
        tolerance: tol,
        pass: max_deviation <= tol,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse_expr;

    const TWO_PI: f64 = std::f64::consts::TAU;

    fn cos_wave(space: &MetricSpace) -> ScalarFunc {
        let ast = parse_expr(&format!("cos({TWO_PI}*x0)"), space.dim()).unwrap();
        ScalarFunc::from_expr(ast, space).unwrap()
    }

    fn small_cfg() -> EstimatorConfig {
        // The full radius schedule matters here: near-critical points the
        // stage sup decays linearly in the radius.
        EstimatorConfig::default().with_pairs(4000)
    }

    #[test]
    fn chart_is_centered_and_wraps() {
        let atlas = Atlas::torus(2).unwrap();
        let space = atlas.space();
        let p = space.point(vec![0.5, 0.5]).unwrap();
        let chart = atlas.chart_at(&p).unwrap();
        assert_eq!(chart.forward(&[0.0, 0.0]), vec![0.5, 0.5]);

        let circle = Atlas::circle();
        let c = circle.space().point(vec![0.9]).unwrap();
        let chart = circle.chart_at(&c).unwrap();
        let wrapped = chart.forward(&[0.2]);
        assert!((wrapped[0] - 0.1).abs() < 1e-12, "got {wrapped:?}");
    }

    #[test]
    fn chart_inverse_round_trips_inside_the_domain() {
        let atlas = Atlas::torus(2).unwrap();
        let space = atlas.space();
        let p = space.point(vec![0.8, 0.1]).unwrap();
        let chart = atlas.chart_at(&p).unwrap();
        let ball = MetricSpace::open_ball(vec![0.0, 0.0], CHART_RADIUS).unwrap();
        for u in ball.sample_points(50, 3) {
            let m = chart.forward(u.coords());
            let back = chart.inverse(&m).expect("inside the chart");
            for (a, b) in back.iter().zip(u.coords()) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn quotient_transitions_are_orthogonal() {
        for atlas in [Atlas::circle(), Atlas::torus(2).unwrap()] {
            let report = transition_orthogonality_check(&atlas, 8, 1, 1e-6).unwrap();
            assert!(
                report.pass,
                "{:?}: defect {}",
                atlas.kind(),
                report.max_defect
            );
        }
    }

    #[test]
    fn sheared_atlas_fails_transition_check_by_the_shear_amount() {
        let shear = 0.3;
        let atlas = Atlas::sheared_fixture(shear);
        let report = transition_orthogonality_check(&atlas, 8, 1, 1e-6).unwrap();
        assert!(!report.pass);
        assert!(
            (report.max_defect - shear).abs() < 0.1,
            "defect {} should be near the shear magnitude {shear}",
            report.max_defect
        );
    }

    #[test]
    fn pointwise_constant_of_cos_wave_on_the_circle() {
        let atlas = Atlas::circle();
        let space = atlas.space();
        let f = cos_wave(&space);
        let cfg = small_cfg();

        // Derivative -2*pi*sin(2*pi*x) vanishes at 0 ...
        let p0 = space.point(vec![0.0]).unwrap();
        let est0 = pt_lip_on_manifold(&f, &p0, &atlas, &cfg).unwrap();
        assert!(
            est0.value < 0.05,
            "expected ~0 at the crest, got {}",
            est0.value
        );

        // ... and has magnitude 2*pi at 1/4.
        let p = space.point(vec![0.25]).unwrap();
        let est = pt_lip_on_manifold(&f, &p, &atlas, &cfg).unwrap();
        assert!(
            (est.value - TWO_PI).abs() / TWO_PI < 0.05,
            "expected ~{TWO_PI}, got {}",
            est.value
        );
    }

    #[test]
    fn constant_function_has_zero_chart_constant() {
        let atlas = Atlas::torus(2).unwrap();
        let space = atlas.space();
        let f = ScalarFunc::constant(4.0, &space);
        let p = space.point(vec![0.3, 0.6]).unwrap();
        let est = pt_lip_on_manifold(&f, &p, &atlas, &small_cfg()).unwrap();
        assert_eq!(est.value, 0.0);
        let report = chart_independence_check(&f, &p, &atlas, &small_cfg(), 0.05).unwrap();
        assert!(report.pass);
        assert_eq!(report.rel_gap, 0.0);
    }

    #[test]
    fn chart_independence_on_circle_and_torus() {
        let circle = Atlas::circle();
        let f = cos_wave(&circle.space());
        let p = circle.space().point(vec![0.25]).unwrap();
        let report = chart_independence_check(&f, &p, &circle, &small_cfg(), 0.05).unwrap();
        assert!(report.pass, "gap {}", report.rel_gap);

        let torus = Atlas::torus(2).unwrap();
        let space = torus.space();
        let ast = parse_expr(&format!("cos({TWO_PI}*x0)*cos({TWO_PI}*x1)"), 2).unwrap();
        let f = ScalarFunc::from_expr(ast, &space).unwrap();
        let p = space.point(vec![0.25, 0.25]).unwrap();
        let report = chart_independence_check(&f, &p, &torus, &small_cfg(), 0.05).unwrap();
        assert!(report.pass, "gap {}", report.rel_gap);
    }

    #[test]
    fn chart_constant_agrees_with_quotient_metric_constant() {
        let cfg = small_cfg();

        let circle = Atlas::circle();
        let space = circle.space();
        let f = cos_wave(&space);
        let p = space.point(vec![0.25]).unwrap();
        let through_chart = pt_lip_on_manifold(&f, &p, &circle, &cfg).unwrap().value;
        let direct = crate::lipest::pointwise_lip(&f, &p, &space, &cfg)
            .unwrap()
            .value;
        let gap = (through_chart - direct).abs() / direct.max(1e-12);
        assert!(gap < 0.05, "circle: chart {through_chart} vs direct {direct}");

        let torus = Atlas::torus(2).unwrap();
        let space = torus.space();
        let ast = parse_expr(&format!("cos({TWO_PI}*x0)*cos({TWO_PI}*x1)"), 2).unwrap();
        let f = ScalarFunc::from_expr(ast, &space).unwrap();
        let p = space.point(vec![0.25, 0.1]).unwrap();
        let through_chart = pt_lip_on_manifold(&f, &p, &torus, &cfg).unwrap().value;
        let direct = crate::lipest::pointwise_lip(&f, &p, &space, &cfg)
            .unwrap()
            .value;
        let gap = (through_chart - direct).abs() / direct.max(1e-12);
        assert!(gap < 0.05, "torus: chart {through_chart} vs direct {direct}");
    }

    #[test]
    fn translations_and_rotations_are_local_isometries() {
        let torus = Atlas::torus(2).unwrap();
        for name in ["translate", "rotate90", "reflect"] {
            let sigma = ManifoldMap::fixture(ManifoldKind::Torus, name).unwrap();
            let report = local_isometry_check(&sigma, &torus, &torus, 6, 200, 2, 1e-9).unwrap();
            assert!(report.pass, "{name} deviated by {}", report.max_deviation);
        }
        let circle = Atlas::circle();
        let sigma = ManifoldMap::fixture(ManifoldKind::Circle, "translate").unwrap();
        let report = local_isometry_check(&sigma, &circle, &circle, 6, 200, 2, 1e-9).unwrap();
        assert!(report.pass);
    }

    #[test]
    fn shear_fails_the_isometry_check() {
        let torus = Atlas::torus(2).unwrap();
        let sigma = ManifoldMap::fixture(ManifoldKind::Torus, "shear").unwrap();
        let report = local_isometry_check(&sigma, &torus, &torus, 6, 200, 2, 1e-9).unwrap();
        assert!(!report.pass);
        assert!(
            report.max_deviation >= 0.1,
            "shear deviation {} should be large",
            report.max_deviation
        );
        assert!(report.worst_base.is_some());
    }

    #[test]
    fn isometry_verdicts_are_seed_stable() {
        let torus = Atlas::torus(2).unwrap();
        let rot = ManifoldMap::fixture(ManifoldKind::Torus, "rotate90").unwrap();
        let shear = ManifoldMap::fixture(ManifoldKind::Torus, "shear").unwrap();
        for seed in [0, 1, 42, 1234] {
            assert!(
                local_isometry_check(&rot, &torus, &torus, 4, 100, seed, 1e-9)
                    .unwrap()
                    .pass
            );
            assert!(
                !local_isometry_check(&shear, &torus, &torus, 4, 100, seed, 1e-9)
                    .unwrap()
                    .pass
            );
        }
    }

    #[test]
    fn composition_with_an_isometry_moves_the_base_point() {
        // Pointwise constants of f o sigma at p match those of f at sigma(p).
        let atlas = Atlas::torus(2).unwrap();
        let space = atlas.space();
        let ast = parse_expr(&format!("cos({TWO_PI}*x0)*cos({TWO_PI}*x1)"), 2).unwrap();
        let f = ScalarFunc::from_expr(ast, &space).unwrap();
        let cfg = small_cfg();
        for name in ["translate", "rotate90"] {
            let sigma = ManifoldMap::fixture(ManifoldKind::Torus, name).unwrap();
            let sigma_for_closure = sigma.clone();
            let composed = ScalarFunc::new(format!("f.{name}"), space.clone(), {
                let f = f.clone();
                move |x| f.eval_coords(&sigma_for_closure.apply(x))
            });
            for p_coords in [vec![0.1, 0.35], vec![0.6, 0.15]] {
                let p = space.point(p_coords).unwrap();
                let lhs = pt_lip_on_manifold(&composed, &p, &atlas, &cfg).unwrap().value;
                let moved = space.point(sigma.apply(p.coords())).unwrap();
                let rhs = pt_lip_on_manifold(&f, &moved, &atlas, &cfg).unwrap().value;
                assert!(lhs.is_finite() && rhs.is_finite());
                let gap = (lhs - rhs).abs() / rhs.max(1e-9);
                assert!(gap < 0.05, "{name}: {lhs} vs {rhs} at {:?}", p.coords());
            }
        }
    }
}
