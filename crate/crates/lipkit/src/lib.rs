//! Lipschitz constants of real-valued functions on metric spaces, weighted
//! composition operators that preserve them, and recovery of the affine
//! dilation structure such operators must carry.
//!
//! The library is organized around a few pieces:
//!
//! - [`metric`]: point domains with distance functions and seeded, nested
//!   samplers (intervals, boxes, balls, spheres, flat quotients, finite sets);
//! - [`expr`] / [`func`]: parsed expressions and evaluable scalar functions
//!   with optional exact gradients;
//! - [`lipest`]: sampled lower-bound estimators for the global, local, and
//!   pointwise Lipschitz constants;
//! - [`wco`]: weighted composition operators `Tf = h * (f o phi)`,
//!   preservation checking, and black-box operator consistency testing;
//! - [`dilation`]: dilation detection, affine structure recovery via
//!   orthogonal Procrustes, 1-D classification, and the canonical operator
//!   families on intervals and cubes;
//! - [`flatman`]: flat quotient manifolds as atlases, chart-based pointwise
//!   constants, and local-isometry certification.
//!
//! Everything is deterministic per seed: reports serialize byte-identically
//! across runs and worker counts.

pub mod corpus;
pub mod dilation;
pub mod error;
pub mod expr;
pub mod flatman;
pub mod func;
pub mod lipest;
pub mod metric;
pub mod report;
pub mod wco;

pub use error::{Error, Result};
pub use expr::{parse_expr, ExprAst};
pub use func::{cone_function, gradient, witness_function, ScalarFunc};
pub use lipest::{
    geometric_radii, global_lip, local_lip, local_lip_via_gradient, pointwise_lip, EstimateKind,
    EstimatorConfig, LipEstimate,
};
pub use metric::{MetricSpace, Point, SpaceDescriptor, SpaceKind};
