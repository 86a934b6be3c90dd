//! Evaluable real-valued functions on metric spaces.
//!
//! A [`ScalarFunc`] bundles an evaluator, an optional exact gradient, a label,
//! and the domain it lives on. Builtins cover the constructions the rest of
//! the library leans on: coordinate functions, the two-variable product, the
//! tent map, cone functions `min(d(x, q), cap)`, and witness functions
//! `min(d(x, s), d(s, t))`.

use crate::error::{Error, Result};
use crate::expr::ExprAst;
use crate::metric::{MetricSpace, Point};
use std::sync::Arc;

/// Central-difference step for numerical gradients.
pub const FD_STEP: f64 = 1e-5;

type EvalFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
type GradFn = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;

/// An evaluable scalar function with an optional exact gradient.
#[derive(Clone)]
pub struct ScalarFunc {
    label: String,
    domain: MetricSpace,
    eval: EvalFn,
    grad: Option<GradFn>,
}

impl std::fmt::Debug for ScalarFunc {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ScalarFunc")
            .field("label", &self.label)
            .field("domain", &self.domain.kind())
            .field("has_grad", &self.grad.is_some())
            .finish()
    }
}

impl ScalarFunc {
    pub fn new(
        label: impl Into<String>,
        domain: MetricSpace,
        eval: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
    ) -> Self {
        ScalarFunc {
            label: label.into(),
            domain,
            eval: Arc::new(eval),
            grad: None,
        }
    }

    pub fn with_grad(
        mut self,
        grad: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
    ) -> Self {
        self.grad = Some(Arc::new(grad));
        self
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn domain(&self) -> &MetricSpace {
        &self.domain
    }

    pub fn has_grad(&self) -> bool {
        self.grad.is_some()
    }

    pub fn eval(&self, p: &Point) -> f64 {
        debug_assert_eq!(p.space_id(), self.domain.id(), "point from another space");
        (self.eval)(p.coords())
    }

    pub fn eval_coords(&self, x: &[f64]) -> f64 {
        (self.eval)(x)
    }

    pub fn exact_grad_coords(&self, x: &[f64]) -> Option<Vec<f64>> {
        self.grad.as_ref().map(|g| g(x))
    }

    /// The constant function.
    pub fn constant(c: f64, domain: &MetricSpace) -> Self {
        ScalarFunc::new(format!("const:{c}"), domain.clone(), move |_| c)
            .with_grad_dim(domain.dim(), move |_| 0.0)
    }

    /// The i-th coordinate function.
    pub fn coordinate(i: usize, domain: &MetricSpace) -> Result<Self> {
        if i >= domain.dim() {
            return Err(Error::DimensionMismatch {
                expected: domain.dim(),
                got: i + 1,
            });
        }
        let dim = domain.dim();
        Ok(
            ScalarFunc::new(format!("coord:{i}"), domain.clone(), move |x| x[i]).with_grad(
                move |_| {
                    let mut g = vec![0.0; dim];
                    g[i] = 1.0;
                    g
                },
            ),
        )
    }

    /// `x0 * x1` with its exact gradient.
    pub fn product01(domain: &MetricSpace) -> Result<Self> {
        if domain.dim() < 2 {
            return Err(Error::DimensionMismatch {
                expected: 2,
                got: domain.dim(),
            });
        }
        let dim = domain.dim();
        Ok(
            ScalarFunc::new("product01", domain.clone(), |x| x[0] * x[1]).with_grad(move |x| {
                let mut g = vec![0.0; dim];
                g[0] = x[1];
                g[1] = x[0];
                g
            }),
        )
    }

    /// The tent map: `x` on `[1/2, 1]`, `1 - x` on `[0, 1/2]`. Non-injective
    /// on `[0, 1]` with local Lipschitz constant 1 everywhere. No gradient
    /// (kink at 1/2).
    pub fn tent(domain: &MetricSpace) -> Result<Self> {
        if domain.dim() != 1 {
            return Err(Error::DimensionMismatch {
                expected: 1,
                got: domain.dim(),
            });
        }
        Ok(ScalarFunc::new("tent", domain.clone(), |x| {
            x[0].max(1.0 - x[0])
        }))
    }

    fn with_grad_dim(self, dim: usize, fill: impl Fn(usize) -> f64 + Send + Sync + 'static) -> Self {
        self.with_grad(move |_| (0..dim).map(&fill).collect())
    }

    /// Build from a parsed expression; the gradient is attached when the tree
    /// is smooth. `dist` anchors are canonicalized against the domain.
    pub fn from_expr(ast: ExprAst, domain: &MetricSpace) -> Result<Self> {
        if ast.min_dim() > domain.dim() {
            return Err(Error::DimensionMismatch {
                expected: domain.dim(),
                got: ast.min_dim(),
            });
        }
        let ast = canonicalize_anchors(ast, domain)?;
        let label = format!("expr:{ast}");
        let dim = domain.dim();
        let smooth = ast.is_smooth();
        let space = domain.clone();
        let eval_ast = ast.clone();
        let mut f = ScalarFunc::new(label, domain.clone(), move |x| eval_ast.eval(x, &space));
        if smooth {
            f = f.with_grad(move |x| ast.grad(x, dim));
        }
        Ok(f)
    }

    /// Pointwise sum; both operands must share a domain.
    pub fn add(&self, other: &ScalarFunc) -> Result<ScalarFunc> {
        if self.domain.id() != other.domain.id() {
            return Err(Error::SpaceMismatch);
        }
        let (ea, eb) = (self.eval.clone(), other.eval.clone());
        let grad = match (&self.grad, &other.grad) {
            (Some(ga), Some(gb)) => {
                let (ga, gb) = (ga.clone(), gb.clone());
                Some(Arc::new(move |x: &[f64]| {
                    ga(x)
                        .into_iter()
                        .zip(gb(x))
                        .map(|(a, b)| a + b)
                        .collect::<Vec<f64>>()
                }) as GradFn)
            }
            _ => None,
        };
        Ok(ScalarFunc {
            label: format!("({} + {})", self.label, other.label),
            domain: self.domain.clone(),
            eval: Arc::new(move |x| ea(x) + eb(x)),
            grad,
        })
    }

    /// Pointwise scalar multiple.
    pub fn scale(&self, c: f64) -> ScalarFunc {
        let e = self.eval.clone();
        let grad = self.grad.as_ref().map(|g| {
            let g = g.clone();
            Arc::new(move |x: &[f64]| g(x).into_iter().map(|v| c * v).collect::<Vec<f64>>())
                as GradFn
        });
        ScalarFunc {
            label: format!("({c} * {})", self.label),
            domain: self.domain.clone(),
            eval: Arc::new(move |x| c * e(x)),
            grad,
        }
    }
}

fn canonicalize_anchors(ast: ExprAst, space: &MetricSpace) -> Result<ExprAst> {
    let rebuild = |a: Box<ExprAst>| -> Result<Box<ExprAst>> {
        Ok(Box::new(canonicalize_anchors(*a, space)?))
    };
    Ok(match ast {
        ExprAst::DistTo(p) => ExprAst::DistTo(space.point(p)?.coords().to_vec()),
        ExprAst::Neg(a) => ExprAst::Neg(rebuild(a)?),
        ExprAst::Abs(a) => ExprAst::Abs(rebuild(a)?),
        ExprAst::Sin(a) => ExprAst::Sin(rebuild(a)?),
        ExprAst::Cos(a) => ExprAst::Cos(rebuild(a)?),
        ExprAst::Add(a, b) => ExprAst::Add(rebuild(a)?, rebuild(b)?),
        ExprAst::Sub(a, b) => ExprAst::Sub(rebuild(a)?, rebuild(b)?),
        ExprAst::Mul(a, b) => ExprAst::Mul(rebuild(a)?, rebuild(b)?),
        ExprAst::Div(a, b) => ExprAst::Div(rebuild(a)?, rebuild(b)?),
        ExprAst::Pow(a, b) => ExprAst::Pow(rebuild(a)?, rebuild(b)?),
        ExprAst::Min(a, b) => ExprAst::Min(rebuild(a)?, rebuild(b)?),
        ExprAst::Max(a, b) => ExprAst::Max(rebuild(a)?, rebuild(b)?),
        leaf => leaf,
    })
}

/// Cone function `f(x) = min(d(x, q), cap)`: 1-Lipschitz, vanishing exactly
/// at `q`, with pointwise constant 1 there.
pub fn cone_function(q: &Point, cap: f64, space: &MetricSpace) -> Result<ScalarFunc> {
    if q.space_id() != space.id() {
        return Err(Error::SpaceMismatch);
    }
    if !(cap.is_finite() && cap > 0.0) {
        return Err(Error::InvalidConfig("cone cap must be positive".into()));
    }
    let anchor = q.coords().to_vec();
    let metric = space.clone();
    let label = format!(
        "cone({})",
        anchor
            .iter()
            .map(|c| format!("{c:.6}"))
            .collect::<Vec<_>>()
            .join(",")
    );
    Ok(ScalarFunc::new(label, space.clone(), move |x| {
        metric.distance_coords(x, &anchor).min(cap)
    }))
}

/// Witness function `f(x) = min(d(x, s), d(s, t))`: 1-Lipschitz by the
/// triangle inequality and separating `s` from `t` by exactly `d(s, t)`.
pub fn witness_function(s: &Point, t: &Point, space: &MetricSpace) -> Result<ScalarFunc> {
    if s.space_id() != space.id() || t.space_id() != space.id() {
        return Err(Error::SpaceMismatch);
    }
    let cap = space.distance(s, t)?;
    if cap == 0.0 {
        return Err(Error::Degenerate(
            "witness function needs two distinct points".into(),
        ));
    }
    let anchor = s.coords().to_vec();
    let metric = space.clone();
    let label = format!(
        "witness({} -> {})",
        anchor
            .iter()
            .map(|c| format!("{c:.6}"))
            .collect::<Vec<_>>()
            .join(","),
        t.coords()
            .iter()
            .map(|c| format!("{c:.6}"))
            .collect::<Vec<_>>()
            .join(",")
    );
    Ok(ScalarFunc::new(label, space.clone(), move |x| {
        metric.distance_coords(x, &anchor).min(cap)
    }))
}

/// Gradient at an interior point: the exact gradient when the function
/// carries one, otherwise central finite differences with step [`FD_STEP`].
pub fn gradient(f: &ScalarFunc, p: &Point) -> Result<Vec<f64>> {
    if p.space_id() != f.domain().id() {
        return Err(Error::SpaceMismatch);
    }
    let x = p.coords();
    if let Some(g) = f.exact_grad_coords(x) {
        if g.iter().all(|v| v.is_finite()) {
            return Ok(g);
        }
        return Err(Error::EvalFailed(format!(
            "exact gradient of {} is non-finite at {x:?}",
            f.label()
        )));
    }
    let mut g = Vec::with_capacity(x.len());
    let mut stencil = x.to_vec();
    for i in 0..x.len() {
        stencil[i] = x[i] + FD_STEP;
        let fp = f.eval_coords(&stencil);
        stencil[i] = x[i] - FD_STEP;
        let fm = f.eval_coords(&stencil);
        stencil[i] = x[i];
        if !(fp.is_finite() && fm.is_finite()) {
            return Err(Error::EvalFailed(format!(
                "evaluation failed at finite-difference stencil of {} near {x:?}",
                f.label()
            )));
        }
        g.push((fp - fm) / (2.0 * FD_STEP));
    }
    Ok(g)
}
