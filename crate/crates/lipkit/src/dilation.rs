//! Dilation detection and affine structure recovery.
//!
//! A weighted composition operator that preserves Lipschitz constants must
//! have a symbol that scales every distance by the same factor; on Euclidean
//! domains that symbol is affine with an orthogonal linear part. This module
//! checks the first property on samples ([`dilation_check`]), recovers the
//! affine form `x -> alpha * A * x + b` from point pairs by orthogonal
//! Procrustes ([`recover_affine`]), classifies 1-D symbols ([`classify_1d`]),
//! and enumerates the canonical operator families on intervals and cubes.

use crate::error::{Error, Result};
use crate::func::ScalarFunc;
use crate::metric::{euclid_dist, MetricSpace};
use crate::report::Json;
use crate::wco::{Symbol, WCOperator};
use itertools::Itertools;
use nalgebra::{DMatrix, DVector};
use serde::Deserialize;

/// Maximum orthogonality defect `max|A^T A - I|` accepted when constructing
/// an [`AffineMap`].
pub const ORTHOGONALITY_DEFECT_TOL: f64 = 1e-9;

/// An affine dilation `x -> alpha * A * x + b` with `A` orthogonal
/// (reflections allowed).
#[derive(Debug, Clone, PartialEq)]
pub struct AffineMap {
    alpha: f64,
    a: DMatrix<f64>,
    b: DVector<f64>,
}

impl AffineMap {
    /// Construct and validate: `alpha > 0`, `A` square of the same dimension
    /// as `b`, and orthogonality defect at most [`ORTHOGONALITY_DEFECT_TOL`].
    pub fn new(alpha: f64, a: DMatrix<f64>, b: DVector<f64>) -> Result<Self> {
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "dilation factor must be positive, got {alpha}"
            )));
        }
        if a.nrows() != a.ncols() || a.nrows() != b.len() || b.is_empty() {
            return Err(Error::InvalidConfig(
                "affine map needs a square matrix matching the offset dimension".into(),
            ));
        }
        let map = AffineMap { alpha, a, b };
        let defect = map.orthogonality_defect();
        if defect > ORTHOGONALITY_DEFECT_TOL {
            return Err(Error::InvalidConfig(format!(
                "linear part is not orthogonal: defect {defect:.3e} exceeds {ORTHOGONALITY_DEFECT_TOL:.0e}"
            )));
        }
        Ok(map)
    }

    pub fn identity(dim: usize) -> Self {
        AffineMap {
            alpha: 1.0,
            a: DMatrix::identity(dim, dim),
            b: DVector::zeros(dim),
        }
    }

    pub fn dim(&self) -> usize {
        self.b.len()
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn linear(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn offset(&self) -> &DVector<f64> {
        &self.b
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let x = DVector::from_column_slice(x);
        (&self.a * x * self.alpha + &self.b).iter().copied().collect()
    }

    /// `max |A^T A - I|` over all entries.
    pub fn orthogonality_defect(&self) -> f64 {
        let gram = self.a.transpose() * &self.a;
        let mut defect = 0.0f64;
        for i in 0..gram.nrows() {
            for j in 0..gram.ncols() {
                let target = if i == j { 1.0 } else { 0.0 };
                defect = defect.max((gram[(i, j)] - target).abs());
            }
        }
        defect
    }

    pub fn det(&self) -> f64 {
        self.a.determinant()
    }

    /// `{"alpha": ..., "A": row-major, "b": ...}`.
    pub fn to_json(&self) -> Json {
        let row_major: Vec<f64> = (0..self.a.nrows())
            .flat_map(|i| (0..self.a.ncols()).map(move |j| (i, j)))
            .map(|(i, j)| self.a[(i, j)])
            .collect();
        Json::obj([
            ("alpha", Json::Float(self.alpha)),
            ("A", Json::floats(&row_major)),
            ("b", Json::floats(self.b.as_slice())),
        ])
    }

    pub fn from_descriptor(desc: &AffineDescriptor) -> Result<Self> {
        let n = desc.b.len();
        if desc.a.len() != n * n {
            return Err(Error::InvalidConfig(format!(
                "A must have {n}x{n} row-major entries, got {}",
                desc.a.len()
            )));
        }
        let a = DMatrix::from_row_slice(n, n, &desc.a);
        AffineMap::new(desc.alpha, a, DVector::from_column_slice(&desc.b))
    }
}

/// JSON-facing affine map descriptor with a row-major matrix.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AffineDescriptor {
    pub alpha: f64,
    #[serde(rename = "A")]
    pub a: Vec<f64>,
    pub b: Vec<f64>,
}

/// Outcome of sampling whether a point map scales all distances uniformly.
#[derive(Debug, Clone)]
pub struct DilationReport {
    /// Median of sampled distance ratios `d_X(phi u, phi v) / d_Y(u, v)`.
    pub alpha_hat: f64,
    /// Max over pairs of `|d_X(phi u, phi v) - alpha_hat * d_Y(u, v)| / d_Y(u, v)`.
    pub residual_max: f64,
    pub pairs: usize,
    pub tolerance: f64,
    pub is_dilation: bool,
}

impl DilationReport {
    pub fn to_json(&self) -> Json {
        Json::obj([
            ("alpha_hat", Json::Float(self.alpha_hat)),
            ("residual_max", Json::Float(self.residual_max)),
            ("pairs", Json::from(self.pairs)),
            ("tolerance", Json::Float(self.tolerance)),
            ("is_dilation", Json::Bool(self.is_dilation)),
        ])
    }
}

/// Sample `n_pairs` point pairs in `source`, push them through `phi`, and
/// test whether all distance ratios agree. The ratio estimate is a median,
/// robust to a stray near-zero denominator.
pub fn dilation_check(
    phi: &dyn Fn(&[f64]) -> Vec<f64>,
    source: &MetricSpace,
    target: &MetricSpace,
    n_pairs: usize,
    seed: u64,
    tol: f64,
) -> Result<DilationReport> {
    if n_pairs == 0 {
        return Err(Error::InvalidConfig("need at least one pair".into()));
    }
    let pts = source.sample_points(2 * n_pairs, seed);
    let mut images = Vec::with_capacity(2 * n_pairs);
    for p in &pts {
        let img = phi(p.coords());
        let canonical = target.point(img.clone()).map_err(|e| {
            Error::OutsideDomain(format!("symbol image {img:?} not in target space: {e}"))
        })?;
        images.push(canonical.coords().to_vec());
    }
    let mut ratios = Vec::with_capacity(n_pairs);
    for i in 0..n_pairs {
        let du = source.distance_coords(pts[2 * i].coords(), pts[2 * i + 1].coords());
        if du == 0.0 {
            continue;
        }
        let dx = target.distance_coords(&images[2 * i], &images[2 * i + 1]);
        ratios.push((dx / du, du, dx));
    }
    if ratios.len() < 2 {
        return Err(Error::Degenerate(
            "fewer than 2 distinct sample pairs".into(),
        ));
    }
    let mut sorted: Vec<f64> = ratios.iter().map(|r| r.0).collect();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let alpha_hat = median_of_sorted(&sorted);
    let residual_max = ratios
        .iter()
        .map(|(_, du, dx)| (dx - alpha_hat * du).abs() / du)
        .fold(0.0f64, f64::max);
    Ok(DilationReport {
        alpha_hat,
        residual_max,
        pairs: ratios.len(),
        tolerance: tol,
        is_dilation: residual_max <= tol,
    })
}

fn median_of_sorted(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

/// Result of fitting an [`AffineMap`] to point pairs.
#[derive(Debug, Clone)]
pub struct AffineRecovery {
    pub map: AffineMap,
    /// Max `|| y_i - map(x_i) ||` over the fit points.
    pub fit_residual: f64,
    pub orth_defect: f64,
}

impl AffineRecovery {
    pub fn to_json(&self) -> Json {
        Json::obj([
            ("map", self.map.to_json()),
            ("fit_residual", Json::Float(self.fit_residual)),
            ("orth_defect", Json::Float(self.orth_defect)),
        ])
    }
}

/// Recover `(alpha, A, b)` from input/output point pairs `(x_i, y_i)` with
/// `y_i = alpha * A * x_i + b`:
///
/// - `alpha` is the mean pairwise-distance ratio,
/// - `A` is the orthogonal Procrustes solution on centered data (the closest
///   orthogonal matrix to the cross-covariance via SVD; reflections
///   permitted, no determinant correction),
/// - `b = mean(y) - alpha * A * mean(x)`.
pub fn recover_affine(pairs: &[(Vec<f64>, Vec<f64>)], dim: usize) -> Result<AffineRecovery> {
    let m = pairs.len();
    if m < dim + 1 {
        return Err(Error::Degenerate(format!(
            "need at least {} points in general position, got {m}",
            dim + 1
        )));
    }
    for (x, y) in pairs {
        if x.len() != dim || y.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: x.len().max(y.len()),
            });
        }
    }

    // alpha: mean ratio of pairwise distances.
    let mut ratio_sum = 0.0;
    let mut ratio_count = 0usize;
    for i in 0..m {
        for j in (i + 1)..m {
            let dx = euclid_dist(&pairs[i].0, &pairs[j].0);
            if dx > 1e-12 {
                ratio_sum += euclid_dist(&pairs[i].1, &pairs[j].1) / dx;
                ratio_count += 1;
            }
        }
    }
    if ratio_count == 0 {
        return Err(Error::Degenerate("all input points coincide".into()));
    }
    let alpha = ratio_sum / ratio_count as f64;
    if alpha <= 0.0 {
        return Err(Error::Degenerate(format!("non-positive alpha {alpha}")));
    }

    let mut x_mean = DVector::zeros(dim);
    let mut y_mean = DVector::zeros(dim);
    for (x, y) in pairs {
        x_mean += DVector::from_column_slice(x);
        y_mean += DVector::from_column_slice(y);
    }
    x_mean /= m as f64;
    y_mean /= m as f64;

    // Cross-covariance of centered data: M = sum (y_i - ym)(x_i - xm)^T.
    let mut cross = DMatrix::zeros(dim, dim);
    let mut x_spread = DMatrix::zeros(dim, m);
    for (idx, (x, y)) in pairs.iter().enumerate() {
        let xc = DVector::from_column_slice(x) - &x_mean;
        let yc = DVector::from_column_slice(y) - &y_mean;
        cross += &yc * xc.transpose();
        x_spread.set_column(idx, &xc);
    }

    // The fit needs full-dimensional spread in the inputs.
    let x_svd = x_spread.svd(false, false);
    let sigma_max = x_svd.singular_values.max();
    let sigma_min = x_svd.singular_values.min();
    if sigma_max <= 0.0 || sigma_min <= 1e-9 * sigma_max {
        return Err(Error::Degenerate(
            "fit points are rank-deficient (not in general position)".into(),
        ));
    }

    let svd = cross.svd(true, true);
    let u = svd.u.as_ref().expect("svd requested u");
    let v_t = svd.v_t.as_ref().expect("svd requested v_t");
    let a = u * v_t;

    let b = &y_mean - alpha * &a * &x_mean;
    let map = AffineMap { alpha, a, b };
    let orth_defect = map.orthogonality_defect();

    let fit_residual = pairs
        .iter()
        .map(|(x, y)| euclid_dist(&map.apply(x), y))
        .fold(0.0f64, f64::max);

    Ok(AffineRecovery {
        map,
        fit_residual,
        orth_defect,
    })
}

/// Outcome of the 1-D classification: an affine fit `phi(x) = sign*alpha*x + c`
/// or a rejection with the reason.
#[derive(Debug, Clone, PartialEq)]
pub enum Classification {
    Affine { sign: i8, c: f64, max_residual: f64 },
    Rejected(RejectReason),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RejectReason {
    /// Duplicate outputs at distinct inputs: no injective map fits.
    NonInjective,
    /// Neither sign fits within tolerance.
    NoFit,
    /// Both signs fit (near-constant data); the injectivity hypothesis fails.
    Degenerate,
}

impl RejectReason {
    pub fn as_str(&self) -> &'static str {
        match self {
            RejectReason::NonInjective => "non-injective",
            RejectReason::NoFit => "no-fit",
            RejectReason::Degenerate => "degenerate",
        }
    }
}

/// Classify 1-D samples `(x_i, phi(x_i))` against the two candidates
/// `phi(x) = +alpha*x + c` and `phi(x) = -alpha*x + c` (least-squares
/// intercept, accepted when the max residual is at most `tol`).
pub fn classify_1d(samples: &[(f64, f64)], alpha: f64, tol: f64) -> Result<Classification> {
    if samples.len() < 2 {
        return Err(Error::Degenerate("need at least 2 samples".into()));
    }
    if !(alpha.is_finite() && alpha > 0.0) {
        return Err(Error::InvalidConfig("alpha must be positive".into()));
    }

    // Injectivity: duplicate outputs at inputs that are distinct under the
    // hypothesis |phi(x) - phi(y)| = alpha |x - y|.
    let input_sep = 2.0 * tol / alpha;
    for (i, (xi, yi)) in samples.iter().enumerate() {
        for (xj, yj) in &samples[i + 1..] {
            if (yi - yj).abs() <= tol && (xi - xj).abs() >= input_sep {
                return Ok(Classification::Rejected(RejectReason::NonInjective));
            }
        }
    }

    let fit = |sign: f64| -> (f64, f64) {
        let c = samples
            .iter()
            .map(|(x, y)| y - sign * alpha * x)
            .sum::<f64>()
            / samples.len() as f64;
        let residual = samples
            .iter()
            .map(|(x, y)| (y - sign * alpha * x - c).abs())
            .fold(0.0f64, f64::max);
        (c, residual)
    };
    let (c_pos, r_pos) = fit(1.0);
    let (c_neg, r_neg) = fit(-1.0);

    match (r_pos <= tol, r_neg <= tol) {
        (true, true) => Ok(Classification::Rejected(RejectReason::Degenerate)),
        (true, false) => Ok(Classification::Affine {
            sign: 1,
            c: c_pos,
            max_residual: r_pos,
        }),
        (false, true) => Ok(Classification::Affine {
            sign: -1,
            c: c_neg,
            max_residual: r_neg,
        }),
        (false, false) => Ok(Classification::Rejected(RejectReason::NoFit)),
    }
}

/// All affine self-maps of the unit cube `[0,1]^n` built from a signed
/// permutation matrix and an offset with entries in {0, 1}: for each signed
/// permutation, offset entries are filtered per coordinate so that both
/// corner values stay in `[0, 1]`, and each accepted map is verified by full
/// corner-image containment. Ordering is lexicographic by permutation, then
/// by sign pattern (bit `i` set means row `i` carries `-1`).
pub fn enumerate_cube_symmetries(n: usize) -> Result<Vec<AffineMap>> {
    if n == 0 || n > 8 {
        return Err(Error::InvalidConfig(format!(
            "cube symmetry enumeration supports 1 <= n <= 8, got {n}"
        )));
    }
    let mut out = Vec::new();
    for perm in (0..n).permutations(n) {
        for sign_bits in 0u32..(1 << n) {
            let mut a = DMatrix::zeros(n, n);
            let mut b = DVector::zeros(n);
            let mut feasible = true;
            for i in 0..n {
                let sign = if sign_bits & (1 << i) != 0 { -1.0 } else { 1.0 };
                a[(i, perm[i])] = sign;
                // Row i sends x_{perm(i)} in {0,1} to sign*x + b_i; keep the
                // b_i in {0,1} under which both corner values stay in [0,1].
                let mut found = None;
                for cand in [0.0, 1.0] {
                    if [0.0, 1.0]
                        .iter()
                        .all(|t| (0.0..=1.0).contains(&(sign * t + cand)))
                    {
                        found = Some(cand);
                        break;
                    }
                }
                match found {
                    Some(v) => b[i] = v,
                    None => {
                        feasible = false;
                        break;
                    }
                }
            }
            if !feasible {
                continue;
            }
            let map = AffineMap { alpha: 1.0, a, b };
            if cube_corners_map_to_corners(&map, n) {
                out.push(map);
            }
        }
    }
    Ok(out)
}

fn cube_corners_map_to_corners(map: &AffineMap, n: usize) -> bool {
    for corner_bits in 0u32..(1 << n) {
        let corner: Vec<f64> = (0..n)
            .map(|i| if corner_bits & (1 << i) != 0 { 1.0 } else { 0.0 })
            .collect();
        let image = map.apply(&corner);
        if !image.iter().all(|&v| v == 0.0 || v == 1.0) {
            return false;
        }
    }
    true
}

/// Weighted composition operator on `[0,1]^n` built from a cube symmetry:
/// `Tf(x) = (+/-1) * f(Px + b)`.
pub fn cube_symmetry_operator(map: &AffineMap, negative_weight: bool) -> Result<WCOperator> {
    let n = map.dim();
    let cube = MetricSpace::unit_box(n)?;
    let weight = if negative_weight { -1.0 } else { 1.0 };
    WCOperator::new(
        ScalarFunc::constant(weight, &cube),
        Symbol::Affine(map.clone()),
        cube.clone(),
        cube,
    )
}

/// The two canonical operators from `Lip([a,b])` to `Lip([c,d])`:
/// `h = +(d-c)/(b-a)` with the increasing symbol
/// `phi(x) = ((b-a)/(d-c))(x-c) + a`, and `h = -(d-c)/(b-a)` with the
/// decreasing symbol `phi(x) = ((b-a)/(d-c))(d-x) + a`. Both preserve global
/// Lipschitz constants; the symbol's dilation factor is `(b-a)/(d-c)`.
pub fn interval_canonical(a: f64, b: f64, c: f64, d: f64) -> Result<(WCOperator, WCOperator)> {
    if !(a < b && c < d) {
        return Err(Error::InvalidConfig(
            "interval_canonical needs a < b and c < d".into(),
        ));
    }
    let source = MetricSpace::interval(a, b)?;
    let target = MetricSpace::interval(c, d)?;
    let scale = (b - a) / (d - c);

    let increasing = AffineMap::new(
        scale,
        DMatrix::identity(1, 1),
        DVector::from_element(1, a - scale * c),
    )?;
    let decreasing = AffineMap::new(
        scale,
        DMatrix::from_element(1, 1, -1.0),
        DVector::from_element(1, a + scale * d),
    )?;

    let plus = WCOperator::new(
        ScalarFunc::constant(1.0 / scale, &target),
        Symbol::Affine(increasing),
        source.clone(),
        target.clone(),
    )?;
    let minus = WCOperator::new(
        ScalarFunc::constant(-1.0 / scale, &target),
        Symbol::Affine(decreasing),
        source,
        target,
    )?;
    Ok((plus, minus))
}
