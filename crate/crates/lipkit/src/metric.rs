//! Point domains, distance functions, and seeded samplers.
//!
//! Every space this library works on is a [`MetricSpace`]: a point set with a
//! distance function and a deterministic sampler. Samplers are seeded and
//! *nested*: the sample sequence for a budget of `n` points is a prefix of the
//! sequence for any larger budget with the same seed, which is what makes the
//! estimators monotone under refinement.

use crate::error::{Error, Result};
use crate::report::Json;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};

/// Unit-norm tolerance for sphere points; they are renormalized on
/// construction so the great-circle formula stays stable.
const SPHERE_NORM_TOL: f64 = 1e-9;

/// Snap tolerance (sup norm) for matching a coordinate vector against a
/// finite set's point list.
const FINITE_SNAP_TOL: f64 = 1e-12;

/// Consecutive rejected proposals before `sample_ball` reports an isolated
/// point.
const ISOLATION_TRIALS: usize = 4096;

/// Identifier tying a [`Point`] to the space that produced it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SpaceId(u64);

/// A point of some metric space: finite coordinates plus the owning space id.
#[derive(Debug, Clone, PartialEq)]
pub struct Point {
    coords: Vec<f64>,
    space_id: SpaceId,
}

impl Point {
    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn space_id(&self) -> SpaceId {
        self.space_id
    }

    pub fn to_json(&self) -> Json {
        Json::floats(&self.coords)
    }
}

/// The supported space kinds and their parameters.
#[derive(Debug, Clone, PartialEq)]
pub enum SpaceKind {
    /// Closed interval `[a, b]` with the absolute-value metric.
    Interval { a: f64, b: f64 },
    /// Axis-aligned closed box with the Euclidean metric.
    Box { lo: Vec<f64>, hi: Vec<f64> },
    /// Open Euclidean ball.
    OpenBall { center: Vec<f64>, radius: f64 },
    /// All of R^n with the Euclidean metric.
    Euclidean,
    /// Unit sphere in R^dim with the great-circle (geodesic) metric.
    SphereGeodesic,
    /// R/Z with the quotient metric; representatives kept in [0, 1).
    CircleQuotient,
    /// R^n/Z^n with the quotient metric; representatives kept in [0, 1)^n.
    TorusQuotient,
    /// A finite list of points with the restricted Euclidean metric.
    FiniteSet { points: Vec<Vec<f64>> },
}

/// A named point domain with a distance function and a seeded sampler.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricSpace {
    kind: SpaceKind,
    dim: usize,
    id: SpaceId,
}

impl MetricSpace {
    pub fn interval(a: f64, b: f64) -> Result<Self> {
        if !(a.is_finite() && b.is_finite() && a < b) {
            return Err(Error::InvalidConfig(format!(
                "interval needs finite a < b, got [{a}, {b}]"
            )));
        }
        Ok(Self::build(SpaceKind::Interval { a, b }, 1))
    }

    pub fn box_nd(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.is_empty() || lo.len() != hi.len() {
            return Err(Error::InvalidConfig(
                "box corners must be nonempty and of equal dimension".into(),
            ));
        }
        if !lo
            .iter()
            .zip(&hi)
            .all(|(l, h)| l.is_finite() && h.is_finite() && l < h)
        {
            return Err(Error::InvalidConfig(
                "box needs finite lo < hi in every coordinate".into(),
            ));
        }
        let dim = lo.len();
        Ok(Self::build(SpaceKind::Box { lo, hi }, dim))
    }

    /// The unit box `[0,1]^n`.
    pub fn unit_box(dim: usize) -> Result<Self> {
        Self::box_nd(vec![0.0; dim], vec![1.0; dim])
    }

    pub fn open_ball(center: Vec<f64>, radius: f64) -> Result<Self> {
        if center.is_empty() || !center.iter().all(|c| c.is_finite()) {
            return Err(Error::InvalidConfig("ball center must be finite".into()));
        }
        if !(radius.is_finite() && radius > 0.0) {
            return Err(Error::InvalidConfig("ball radius must be positive".into()));
        }
        let dim = center.len();
        Ok(Self::build(SpaceKind::OpenBall { center, radius }, dim))
    }

    pub fn euclidean(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidConfig("dimension must be at least 1".into()));
        }
        Ok(Self::build(SpaceKind::Euclidean, dim))
    }

    /// Unit sphere in `R^ambient_dim` (so `sphere(3)` is S^2).
    pub fn sphere(ambient_dim: usize) -> Result<Self> {
        if ambient_dim < 2 {
            return Err(Error::InvalidConfig(
                "sphere needs ambient dimension at least 2".into(),
            ));
        }
        Ok(Self::build(SpaceKind::SphereGeodesic, ambient_dim))
    }

    pub fn circle() -> Self {
        Self::build(SpaceKind::CircleQuotient, 1)
    }

    pub fn torus(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidConfig("dimension must be at least 1".into()));
        }
        Ok(Self::build(SpaceKind::TorusQuotient, dim))
    }

    pub fn finite_set(points: Vec<Vec<f64>>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidConfig("finite set must be nonempty".into()));
        }
        let dim = points[0].len();
        if dim == 0 || !points.iter().all(|p| p.len() == dim) {
            return Err(Error::InvalidConfig(
                "finite set points must share a positive dimension".into(),
            ));
        }
        if !points.iter().flatten().all(|c| c.is_finite()) {
            return Err(Error::InvalidConfig(
                "finite set points must be finite".into(),
            ));
        }
        Ok(Self::build(SpaceKind::FiniteSet { points }, dim))
    }

    fn build(kind: SpaceKind, dim: usize) -> Self {
        let id = SpaceId(hash_kind(&kind, dim));
        MetricSpace { kind, dim, id }
    }

    pub fn kind(&self) -> &SpaceKind {
        &self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn id(&self) -> SpaceId {
        self.id
    }

    /// Whether the metric is the flat Euclidean one on a subset of R^n
    /// (so gradient norms equal local Lipschitz constants).
    pub fn is_euclidean_flat(&self) -> bool {
        matches!(
            self.kind,
            SpaceKind::Interval { .. }
                | SpaceKind::Box { .. }
                | SpaceKind::OpenBall { .. }
                | SpaceKind::Euclidean
        )
    }

    /// An upper bound on the diameter, when one exists.
    pub fn diameter_bound(&self) -> Option<f64> {
        match &self.kind {
            SpaceKind::Interval { a, b } => Some(b - a),
            SpaceKind::Box { lo, hi } => Some(euclid_dist(lo, hi)),
            SpaceKind::OpenBall { radius, .. } => Some(2.0 * radius),
            SpaceKind::Euclidean => None,
            SpaceKind::SphereGeodesic => Some(std::f64::consts::PI),
            SpaceKind::CircleQuotient | SpaceKind::TorusQuotient => {
                Some(0.5 * (self.dim as f64).sqrt())
            }
            SpaceKind::FiniteSet { points } => {
                let mut max = 0.0f64;
                for (i, p) in points.iter().enumerate() {
                    for q in &points[i + 1..] {
                        max = max.max(euclid_dist(p, q));
                    }
                }
                Some(max)
            }
        }
    }

    /// Construct a point of this space, validating membership and
    /// canonicalizing the representative (sphere points are renormalized,
    /// quotient representatives wrapped into `[0,1)^n`, finite-set points
    /// snapped to the matching list entry).
    pub fn point(&self, coords: Vec<f64>) -> Result<Point> {
        if coords.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: coords.len(),
            });
        }
        if !coords.iter().all(|c| c.is_finite()) {
            return Err(Error::NonFinitePoint);
        }
        let coords = self.canonicalize(coords)?;
        Ok(Point {
            coords,
            space_id: self.id,
        })
    }

    fn canonicalize(&self, coords: Vec<f64>) -> Result<Vec<f64>> {
        match &self.kind {
            SpaceKind::Interval { a, b } => {
                let x = coords[0];
                if x < *a || x > *b {
                    return Err(Error::OutsideDomain(format!("{x} not in [{a}, {b}]")));
                }
                Ok(coords)
            }
            SpaceKind::Box { lo, hi } => {
                for (i, &x) in coords.iter().enumerate() {
                    if x < lo[i] || x > hi[i] {
                        return Err(Error::OutsideDomain(format!(
                            "coordinate {i} = {x} not in [{}, {}]",
                            lo[i], hi[i]
                        )));
                    }
                }
                Ok(coords)
            }
            SpaceKind::OpenBall { center, radius } => {
                let d = euclid_dist(&coords, center);
                if d >= *radius {
                    return Err(Error::OutsideDomain(format!(
                        "distance {d} from ball center is not below radius {radius}"
                    )));
                }
                Ok(coords)
            }
            SpaceKind::Euclidean => Ok(coords),
            SpaceKind::SphereGeodesic => {
                let norm = euclid_norm(&coords);
                if (norm - 1.0).abs() > SPHERE_NORM_TOL {
                    return Err(Error::OutsideDomain(format!(
                        "sphere point norm {norm} differs from 1 by more than {SPHERE_NORM_TOL}"
                    )));
                }
                Ok(coords.iter().map(|c| c / norm).collect())
            }
            SpaceKind::CircleQuotient | SpaceKind::TorusQuotient => {
                Ok(coords.iter().map(|&c| wrap_unit(c)).collect())
            }
            SpaceKind::FiniteSet { points } => {
                for p in points {
                    if coords
                        .iter()
                        .zip(p)
                        .all(|(a, b)| (a - b).abs() <= FINITE_SNAP_TOL)
                    {
                        return Ok(p.clone());
                    }
                }
                Err(Error::OutsideDomain(
                    "point does not match any finite-set element".into(),
                ))
            }
        }
    }

    /// Wrap or renormalize coordinates into canonical representative form
    /// without membership checks: quotient coordinates are wrapped into
    /// `[0,1)^n`, sphere vectors renormalized, everything else passes
    /// through. Used on operator symbol images (range-checked on a sample
    /// budget at construction) before metric evaluation.
    pub fn canonicalize_lenient(&self, coords: Vec<f64>) -> Vec<f64> {
        match &self.kind {
            SpaceKind::SphereGeodesic => {
                let norm = euclid_norm(&coords);
                if norm > 1e-12 {
                    coords.iter().map(|c| c / norm).collect()
                } else {
                    coords
                }
            }
            SpaceKind::CircleQuotient | SpaceKind::TorusQuotient => {
                coords.iter().map(|&c| wrap_unit(c)).collect()
            }
            _ => coords,
        }
    }

    /// Distance between two points of this space.
    ///
    /// Quotient spaces return the geodesic quotient distance (minimum over
    /// deck translations `k` in `{-1,0,1}^n`, exact for representatives in
    /// `[0,1)^n`); the sphere returns the great-circle distance.
    pub fn distance(&self, p: &Point, q: &Point) -> Result<f64> {
        if p.space_id != self.id || q.space_id != self.id {
            return Err(Error::SpaceMismatch);
        }
        Ok(self.distance_coords(&p.coords, &q.coords))
    }

    /// Distance on raw coordinate vectors, assumed canonical for this space.
    pub fn distance_coords(&self, p: &[f64], q: &[f64]) -> f64 {
        debug_assert_eq!(p.len(), self.dim);
        debug_assert_eq!(q.len(), self.dim);
        match &self.kind {
            SpaceKind::Interval { .. } => (p[0] - q[0]).abs(),
            SpaceKind::Box { .. }
            | SpaceKind::OpenBall { .. }
            | SpaceKind::Euclidean
            | SpaceKind::FiniteSet { .. } => euclid_dist(p, q),
            SpaceKind::SphereGeodesic => great_circle(p, q),
            SpaceKind::CircleQuotient | SpaceKind::TorusQuotient => quotient_dist(p, q),
        }
    }

    /// Draw `n` points. Deterministic for a fixed seed, and the sequence for
    /// a smaller budget is a prefix of the sequence for a larger one.
    pub fn sample_points(&self, n: usize, seed: u64) -> Vec<Point> {
        let mut stream = self.stream(seed);
        (0..n).map(|_| stream.next_point()).collect()
    }

    /// The same nested sample sequence as [`MetricSpace::sample_points`],
    /// delivered incrementally so large budgets need not be materialized.
    pub fn stream(&self, seed: u64) -> PointStream {
        PointStream {
            space: self.clone(),
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    fn sample_one(&self, rng: &mut ChaCha8Rng) -> Point {
        let coords = match &self.kind {
            SpaceKind::Interval { a, b } => vec![a + (b - a) * rng.random::<f64>()],
            SpaceKind::Box { lo, hi } => lo
                .iter()
                .zip(hi)
                .map(|(l, h)| l + (h - l) * rng.random::<f64>())
                .collect(),
            SpaceKind::OpenBall { center, radius } => loop {
                let cand: Vec<f64> = center
                    .iter()
                    .map(|c| c + radius * (2.0 * rng.random::<f64>() - 1.0))
                    .collect();
                if euclid_dist(&cand, center) < *radius {
                    break cand;
                }
            },
            SpaceKind::Euclidean => (0..self.dim).map(|_| sample_normal(rng)).collect(),
            SpaceKind::SphereGeodesic => loop {
                let cand: Vec<f64> = (0..self.dim).map(|_| sample_normal(rng)).collect();
                let norm = euclid_norm(&cand);
                if norm > 1e-6 {
                    break cand.iter().map(|c| c / norm).collect();
                }
            },
            SpaceKind::CircleQuotient | SpaceKind::TorusQuotient => {
                (0..self.dim).map(|_| rng.random::<f64>()).collect()
            }
            SpaceKind::FiniteSet { points } => {
                points[rng.random_range(0..points.len())].clone()
            }
        };
        Point {
            coords,
            space_id: self.id,
        }
    }

    /// Draw `n` points of the punctured open metric ball `B(center, radius)`,
    /// by rejection against proposals local to the ball (the space's own
    /// sampler for finite sets). Errors with an isolation diagnostic when a
    /// fixed trial budget passes without a single acceptance.
    pub fn sample_ball(
        &self,
        center: &Point,
        radius: f64,
        n: usize,
        seed: u64,
    ) -> Result<Vec<Point>> {
        if center.space_id != self.id {
            return Err(Error::SpaceMismatch);
        }
        if !(radius.is_finite() && radius > 0.0) {
            return Err(Error::InvalidConfig("ball radius must be positive".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = Vec::with_capacity(n);
        let mut rejected_in_a_row = 0usize;
        while out.len() < n {
            let cand = self.propose_near(&center.coords, radius, &mut rng);
            let accepted = match cand {
                Some(coords) => {
                    let d = self.distance_coords(&center.coords, &coords);
                    if d > 0.0 && d < radius {
                        out.push(Point {
                            coords,
                            space_id: self.id,
                        });
                        true
                    } else {
                        false
                    }
                }
                None => false,
            };
            if accepted {
                rejected_in_a_row = 0;
            } else {
                rejected_in_a_row += 1;
                if rejected_in_a_row >= ISOLATION_TRIALS {
                    return Err(Error::IsolatedPoint {
                        trials: ISOLATION_TRIALS,
                        radius,
                    });
                }
            }
        }
        Ok(out)
    }

    /// One proposal for ball rejection sampling; `None` when the proposal
    /// falls outside the space.
    fn propose_near(
        &self,
        center: &[f64],
        radius: f64,
        rng: &mut ChaCha8Rng,
    ) -> Option<Vec<f64>> {
        match &self.kind {
            SpaceKind::FiniteSet { points } => {
                Some(points[rng.random_range(0..points.len())].clone())
            }
            SpaceKind::SphereGeodesic => {
                let cand: Vec<f64> = center
                    .iter()
                    .map(|c| c + radius * (2.0 * rng.random::<f64>() - 1.0))
                    .collect();
                let norm = euclid_norm(&cand);
                if norm > 1e-6 {
                    Some(cand.iter().map(|c| c / norm).collect())
                } else {
                    None
                }
            }
            SpaceKind::CircleQuotient | SpaceKind::TorusQuotient => Some(
                center
                    .iter()
                    .map(|c| wrap_unit(c + radius * (2.0 * rng.random::<f64>() - 1.0)))
                    .collect(),
            ),
            _ => {
                let cand: Vec<f64> = center
                    .iter()
                    .map(|c| c + radius * (2.0 * rng.random::<f64>() - 1.0))
                    .collect();
                if self.contains(&cand) {
                    Some(cand)
                } else {
                    None
                }
            }
        }
    }

    fn contains(&self, coords: &[f64]) -> bool {
        match &self.kind {
            SpaceKind::Interval { a, b } => coords[0] >= *a && coords[0] <= *b,
            SpaceKind::Box { lo, hi } => coords
                .iter()
                .enumerate()
                .all(|(i, &x)| x >= lo[i] && x <= hi[i]),
            SpaceKind::OpenBall { center, radius } => euclid_dist(coords, center) < *radius,
            SpaceKind::Euclidean => true,
            _ => unreachable!("contains is only used for flat Euclidean kinds"),
        }
    }

    pub fn to_descriptor(&self) -> SpaceDescriptor {
        let mut params = SpaceParams::default();
        let kind = match &self.kind {
            SpaceKind::Interval { a, b } => {
                params.a = Some(*a);
                params.b = Some(*b);
                "interval"
            }
            SpaceKind::Box { lo, hi } => {
                params.lo = Some(lo.clone());
                params.hi = Some(hi.clone());
                "box"
            }
            SpaceKind::OpenBall { center, radius } => {
                params.center = Some(center.clone());
                params.radius = Some(*radius);
                "open_ball"
            }
            SpaceKind::Euclidean => "euclidean",
            SpaceKind::SphereGeodesic => "sphere_geodesic",
            SpaceKind::CircleQuotient => "circle_quotient",
            SpaceKind::TorusQuotient => "torus_quotient",
            SpaceKind::FiniteSet { points } => {
                params.points = Some(points.clone());
                "finite_set"
            }
        };
        SpaceDescriptor {
            kind: kind.to_owned(),
            dim: self.dim,
            params,
        }
    }

    pub fn from_descriptor(desc: &SpaceDescriptor) -> Result<Self> {
        let p = &desc.params;
        let missing = |what: &str| Error::InvalidConfig(format!("{}: missing {what}", desc.kind));
        let space = match desc.kind.as_str() {
            "interval" => Self::interval(
                p.a.ok_or_else(|| missing("params.a"))?,
                p.b.ok_or_else(|| missing("params.b"))?,
            )?,
            "box" => Self::box_nd(
                p.lo.clone().ok_or_else(|| missing("params.lo"))?,
                p.hi.clone().ok_or_else(|| missing("params.hi"))?,
            )?,
            "open_ball" => Self::open_ball(
                p.center.clone().ok_or_else(|| missing("params.center"))?,
                p.radius.ok_or_else(|| missing("params.radius"))?,
            )?,
            "euclidean" => Self::euclidean(desc.dim)?,
            "sphere_geodesic" => Self::sphere(desc.dim)?,
            "circle_quotient" => Self::circle(),
            "torus_quotient" => Self::torus(desc.dim)?,
            "finite_set" => {
                Self::finite_set(p.points.clone().ok_or_else(|| missing("params.points"))?)?
            }
            other => {
                return Err(Error::InvalidConfig(format!("unknown space kind: {other}")));
            }
        };
        if space.dim != desc.dim {
            return Err(Error::DimensionMismatch {
                expected: space.dim,
                got: desc.dim,
            });
        }
        Ok(space)
    }

    pub fn to_json(&self) -> Json {
        let desc = self.to_descriptor();
        let mut params = Vec::new();
        if let Some(a) = desc.params.a {
            params.push(("a".to_owned(), Json::Float(a)));
        }
        if let Some(b) = desc.params.b {
            params.push(("b".to_owned(), Json::Float(b)));
        }
        if let Some(lo) = &desc.params.lo {
            params.push(("lo".to_owned(), Json::floats(lo)));
        }
        if let Some(hi) = &desc.params.hi {
            params.push(("hi".to_owned(), Json::floats(hi)));
        }
        if let Some(center) = &desc.params.center {
            params.push(("center".to_owned(), Json::floats(center)));
        }
        if let Some(radius) = desc.params.radius {
            params.push(("radius".to_owned(), Json::Float(radius)));
        }
        if let Some(points) = &desc.params.points {
            params.push((
                "points".to_owned(),
                Json::arr(points.iter().map(Json::floats)),
            ));
        }
        Json::obj([
            ("kind", Json::str(desc.kind)),
            ("dim", Json::from(desc.dim)),
            ("params", Json::Obj(params)),
        ])
    }
}

/// Incremental view of a space's nested sample sequence.
pub struct PointStream {
    space: MetricSpace,
    rng: ChaCha8Rng,
}

impl PointStream {
    pub fn next_point(&mut self) -> Point {
        self.space.sample_one(&mut self.rng)
    }
}

/// JSON-facing space descriptor: `{"kind": ..., "dim": ..., "params": {...}}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpaceDescriptor {
    pub kind: String,
    pub dim: usize,
    #[serde(default)]
    pub params: SpaceParams,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpaceParams {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub b: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lo: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hi: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub center: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub points: Option<Vec<Vec<f64>>>,
}

pub fn euclid_dist(p: &[f64], q: &[f64]) -> f64 {
    p.iter()
        .zip(q)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt()
}

pub fn euclid_norm(p: &[f64]) -> f64 {
    p.iter().map(|a| a * a).sum::<f64>().sqrt()
}

/// Wrap a coordinate into `[0, 1)`.
fn wrap_unit(x: f64) -> f64 {
    let w = x - x.floor();
    // x.floor() == x for negative values very close to an integer can still
    // leave w == 1.0 after rounding; fold it back.
    if w >= 1.0 {
        0.0
    } else {
        w
    }
}

/// Quotient distance on R^n/Z^n for representatives in `[0,1)^n`: minimum of
/// the ambient Euclidean distance over deck translations in `{-1,0,1}` per
/// coordinate. Coordinates separate, so the minimum is taken per coordinate.
fn quotient_dist(p: &[f64], q: &[f64]) -> f64 {
    p.iter()
        .zip(q)
        .map(|(a, b)| {
            let d = (a - b).abs();
            let d = d.min((a - b + 1.0).abs()).min((a - b - 1.0).abs());
            d * d
        })
        .sum::<f64>()
        .sqrt()
}

/// Great-circle distance between unit vectors, computed via atan2 of the
/// orthogonal-component norm and the dot product (accurate near coincident
/// and antipodal pairs, unlike plain acos). Identical representatives short-
/// circuit to exactly zero, which the rounded dot product would not give.
fn great_circle(p: &[f64], q: &[f64]) -> f64 {
    if p == q {
        return 0.0;
    }
    let dot: f64 = p.iter().zip(q).map(|(a, b)| a * b).sum();
    let ortho: Vec<f64> = p.iter().zip(q).map(|(a, b)| a - dot * b).collect();
    euclid_norm(&ortho).atan2(dot)
}

/// One standard normal draw via Box-Muller (two uniforms per draw, cosine
/// branch only, so the stream stays simple and deterministic).
fn sample_normal(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = rng.random::<f64>();
    let u2: f64 = rng.random::<f64>();
    let r = (-2.0 * (1.0 - u1).ln()).sqrt();
    r * (2.0 * std::f64::consts::PI * u2).cos()
}

fn hash_kind(kind: &SpaceKind, dim: usize) -> u64 {
    let mut h = DefaultHasher::new();
    dim.hash(&mut h);
    match kind {
        SpaceKind::Interval { a, b } => {
            0u8.hash(&mut h);
            a.to_bits().hash(&mut h);
            b.to_bits().hash(&mut h);
        }
        SpaceKind::Box { lo, hi } => {
            1u8.hash(&mut h);
            for c in lo.iter().chain(hi) {
                c.to_bits().hash(&mut h);
            }
        }
        SpaceKind::OpenBall { center, radius } => {
            2u8.hash(&mut h);
            for c in center {
                c.to_bits().hash(&mut h);
            }
            radius.to_bits().hash(&mut h);
        }
        SpaceKind::Euclidean => 3u8.hash(&mut h),
        SpaceKind::SphereGeodesic => 4u8.hash(&mut h),
        SpaceKind::CircleQuotient => 5u8.hash(&mut h),
        SpaceKind::TorusQuotient => 6u8.hash(&mut h),
        SpaceKind::FiniteSet { points } => {
            7u8.hash(&mut h);
            for p in points {
                for c in p {
                    c.to_bits().hash(&mut h);
                }
            }
        }
    }
    h.finish()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interval_endpoint_distance() {
        let x = MetricSpace::interval(0.0, 1.0).unwrap();
        let p = x.point(vec![0.0]).unwrap();
        let q = x.point(vec![1.0]).unwrap();
        assert_eq!(x.distance(&p, &q).unwrap(), 1.0);
    }

    /// Brute-force quotient distance over all deck translations in {-1,0,1}^n.
    fn quotient_dist_oracle(p: &[f64], q: &[f64]) -> f64 {
        fn rec(p: &[f64], q: &[f64], i: usize, shift: &mut Vec<f64>, best: &mut f64) {
            if i == p.len() {
                let shifted: Vec<f64> = q.iter().zip(shift.iter()).map(|(b, k)| b + k).collect();
                *best = best.min(euclid_dist(p, &shifted));
                return;
            }
            for k in [-1.0, 0.0, 1.0] {
                shift.push(k);
                rec(p, q, i + 1, shift, best);
                shift.pop();
            }
        }
        let mut best = f64::INFINITY;
        rec(p, q, 0, &mut Vec::new(), &mut best);
        best
    }

    #[test]
    fn torus_distance_matches_deck_translation_oracle() {
        let t = MetricSpace::torus(2).unwrap();
        let p = t.point(vec![0.1, 0.1]).unwrap();
        let q = t.point(vec![0.9, 0.1]).unwrap();
        let d = t.distance(&p, &q).unwrap();
        assert!((d - 0.2).abs() < 1e-15, "expected 0.2, got {d}");
        let oracle = quotient_dist_oracle(p.coords(), q.coords());
        assert!((d - oracle).abs() <= 1e-12, "{d} vs oracle {oracle}");

        // A spread of random pairs against the oracle.
        let pts = t.sample_points(40, 11);
        for w in pts.chunks(2) {
            let d = t.distance(&w[0], &w[1]).unwrap();
            let oracle = quotient_dist_oracle(w[0].coords(), w[1].coords());
            assert!((d - oracle).abs() <= 1e-12, "{d} vs oracle {oracle}");
        }
    }

    #[test]
    fn sphere_antipodal_distance_is_pi() {
        let s = MetricSpace::sphere(3).unwrap();
        let n = s.point(vec![0.0, 0.0, 1.0]).unwrap();
        let sp = s.point(vec![0.0, 0.0, -1.0]).unwrap();
        let d = s.distance(&n, &sp).unwrap();
        assert!((d - std::f64::consts::PI).abs() < 1e-12, "got {d}");
    }

    #[test]
    fn sphere_rejects_far_from_unit_norm_and_renormalizes_close() {
        let s = MetricSpace::sphere(3).unwrap();
        assert!(s.point(vec![0.0, 0.0, 1.5]).is_err());
        let p = s.point(vec![0.0, 0.0, 1.0 + 5e-10]).unwrap();
        assert_eq!(euclid_norm(p.coords()), 1.0);
    }

    #[test]
    fn sampling_is_deterministic_and_nested() {
        let b = MetricSpace::unit_box(2).unwrap();
        let long = b.sample_points(100, 7);
        let again = b.sample_points(100, 7);
        assert_eq!(long, again);
        let short = b.sample_points(50, 7);
        assert_eq!(&long[..50], &short[..]);
        assert!(b.sample_points(0, 7).is_empty());
    }

    #[test]
    fn ball_samples_stay_in_punctured_ball() {
        let x = MetricSpace::interval(0.0, 1.0).unwrap();
        let c = x.point(vec![0.5]).unwrap();
        let pts = x.sample_ball(&c, 0.1, 10, 3).unwrap();
        assert_eq!(pts.len(), 10);
        for p in &pts {
            let d = x.distance(&c, p).unwrap();
            assert!(d > 0.0 && d < 0.1, "distance {d} outside (0, 0.1)");
        }
    }

    #[test]
    fn ball_sampling_on_torus_respects_quotient_distance() {
        let t = MetricSpace::torus(2).unwrap();
        let c = t.point(vec![0.0, 0.0]).unwrap();
        let pts = t.sample_ball(&c, 0.2, 5, 9).unwrap();
        for p in &pts {
            let d = t.distance(&c, p).unwrap();
            assert!(d > 0.0 && d < 0.2, "quotient distance {d} outside (0, 0.2)");
        }
    }

    #[test]
    fn isolated_point_is_reported() {
        let f = MetricSpace::finite_set(vec![vec![0.0], vec![1.0]]).unwrap();
        let c = f.point(vec![0.0]).unwrap();
        let err = f.sample_ball(&c, 0.5, 1, 0).unwrap_err();
        assert!(matches!(err, Error::IsolatedPoint { .. }), "got {err:?}");
    }

    #[test]
    fn finite_set_allows_oversampling_with_repetition() {
        let f = MetricSpace::finite_set(vec![vec![0.0], vec![1.0]]).unwrap();
        let pts = f.sample_points(10, 1);
        assert_eq!(pts.len(), 10);
    }

    #[test]
    fn quotient_distance_never_exceeds_ambient() {
        let t = MetricSpace::torus(2).unwrap();
        let pts = t.sample_points(60, 5);
        for w in pts.chunks(2) {
            let dq = t.distance(&w[0], &w[1]).unwrap();
            let da = euclid_dist(w[0].coords(), w[1].coords());
            assert!(dq <= da + 1e-15);
        }
    }

    #[test]
    fn descriptor_round_trip() {
        let spaces = vec![
            MetricSpace::interval(-1.0, 2.0).unwrap(),
            MetricSpace::unit_box(3).unwrap(),
            MetricSpace::open_ball(vec![0.0, 0.0], 0.4).unwrap(),
            MetricSpace::euclidean(2).unwrap(),
            MetricSpace::sphere(3).unwrap(),
            MetricSpace::circle(),
            MetricSpace::torus(2).unwrap(),
            MetricSpace::finite_set(vec![vec![0.0], vec![1.0]]).unwrap(),
        ];
        for s in spaces {
            let json = serde_json::to_string(&s.to_descriptor()).unwrap();
            let desc: SpaceDescriptor = serde_json::from_str(&json).unwrap();
            let back = MetricSpace::from_descriptor(&desc).unwrap();
            assert_eq!(s, back);
        }
    }

    #[test]
    fn descriptor_rejects_unknown_fields() {
        let r: std::result::Result<SpaceDescriptor, _> =
            serde_json::from_str(r#"{"kind":"interval","dim":1,"params":{"a":0,"b":1},"x":3}"#);
        assert!(r.is_err());
        let r: std::result::Result<SpaceDescriptor, _> =
            serde_json::from_str(r#"{"kind":"interval","dim":1,"params":{"a":0,"b":1,"q":2}}"#);
        assert!(r.is_err());
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let b = MetricSpace::unit_box(2).unwrap();
        assert!(matches!(
            b.point(vec![0.5]),
            Err(Error::DimensionMismatch { .. })
        ));
    }
}
