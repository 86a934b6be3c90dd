//! The default probe corpus for operator checks.
//!
//! The mix mirrors the constructions the preservation and consistency
//! machinery leans on: the constant-one function, coordinate functions, the
//! two-variable product (or the tent map in dimension 1), two random parsed
//! expressions, cone functions at sampled anchors, and witness functions at
//! sampled pairs.

use crate::error::{Error, Result};
use crate::expr::parse_expr;
use crate::func::{cone_function, witness_function, ScalarFunc};
use crate::metric::MetricSpace;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Anchors used by the default corpus shape.
const DEFAULT_CONE_ANCHORS: usize = 5;
const DEFAULT_WITNESS_PAIRS: usize = 3;

/// Build the probe corpus on `space`.
///
/// Without a target size this is the default shape: constant one, all
/// coordinates, product `x0*x1` (dimension >= 2) or the tent map (dimension
/// 1), two random parsed expressions, cone functions at 5 sampled anchors,
/// and witness functions at 3 sampled pairs. With `Some(n)` the cone/witness
/// tail is extended (or trimmed) alternately until the corpus has exactly
/// `n` entries.
pub fn probe_corpus(
    space: &MetricSpace,
    seed: u64,
    target_len: Option<usize>,
) -> Result<Vec<ScalarFunc>> {
    let dim = space.dim();
    let mut corpus: Vec<ScalarFunc> = Vec::new();
    corpus.push(ScalarFunc::constant(1.0, space));
    for i in 0..dim {
        corpus.push(ScalarFunc::coordinate(i, space)?);
    }
    if dim >= 2 {
        corpus.push(ScalarFunc::product01(space)?);
    } else {
        corpus.push(ScalarFunc::tent_like(space)?);
    }
    for text in random_expressions(dim, seed) {
        corpus.push(ScalarFunc::from_expr(parse_expr(&text, dim)?, space)?);
    }

    let base_len = corpus.len();
    let tail_len = match target_len {
        Some(n) => {
            if n < base_len {
                return Err(Error::InvalidConfig(format!(
                    "corpus target {n} is below the {base_len} base functions"
                )));
            }
            n - base_len
        }
        None => DEFAULT_CONE_ANCHORS + DEFAULT_WITNESS_PAIRS,
    };

    // Anchor pool: cones at single points, witnesses at consecutive pairs.
    let anchors = space.sample_points(3 * tail_len + 8, seed ^ 0xC0FFEE);
    let cap = space.diameter_bound().map(|d| d.max(1.0)).unwrap_or(1.0);
    let mut cones = 0usize;
    let mut witnesses = 0usize;
    let mut cursor = 0usize;
    for slot in 0..tail_len {
        let want_cone = if target_len.is_none() {
            slot < DEFAULT_CONE_ANCHORS
        } else {
            slot % 2 == 0
        };
        if want_cone {
            let q = &anchors[cursor];
            cursor += 1;
            corpus.push(cone_function(q, cap, space)?);
            cones += 1;
        } else {
            // Find a pair of distinct anchors for a witness function.
            loop {
                if cursor + 1 >= anchors.len() {
                    return Err(Error::Degenerate(
                        "anchor pool exhausted while building witness functions".into(),
                    ));
                }
                let (s, t) = (&anchors[cursor], &anchors[cursor + 1]);
                cursor += 2;
                if space.distance(s, t)? > 0.0 {
                    corpus.push(witness_function(s, t, space)?);
                    witnesses += 1;
                    break;
                }
            }
        }
    }
    debug_assert_eq!(cones + witnesses, tail_len);
    if let Some(n) = target_len {
        debug_assert_eq!(corpus.len(), n);
    }
    Ok(corpus)
}

impl ScalarFunc {
    /// Dimension-1 stand-in for the product function in the corpus.
    fn tent_like(space: &MetricSpace) -> Result<ScalarFunc> {
        match space.dim() {
            1 => ScalarFunc::tent(space),
            _ => ScalarFunc::product01(space),
        }
    }
}

/// A corpus of builtins only (no parsed expressions): constant one, the
/// coordinates, the product (or tent in dimension 1), then alternating cone
/// and witness functions at sampled anchors up to exactly `target_len`
/// entries. This is the corpus the estimator-law checks run on; every member
/// has a known or well-understood analytic constant.
pub fn builtin_corpus(
    space: &MetricSpace,
    seed: u64,
    target_len: usize,
) -> Result<Vec<ScalarFunc>> {
    let dim = space.dim();
    let mut corpus: Vec<ScalarFunc> = Vec::new();
    corpus.push(ScalarFunc::constant(1.0, space));
    for i in 0..dim {
        corpus.push(ScalarFunc::coordinate(i, space)?);
    }
    corpus.push(ScalarFunc::tent_like(space)?);
    if target_len < corpus.len() {
        return Err(Error::InvalidConfig(format!(
            "corpus target {target_len} is below the {} base functions",
            corpus.len()
        )));
    }
    let anchors = space.sample_points(3 * target_len + 8, seed ^ 0xC0FFEE);
    let cap = space.diameter_bound().map(|d| d.max(1.0)).unwrap_or(1.0);
    let mut cursor = 0usize;
    let mut slot = 0usize;
    while corpus.len() < target_len {
        if slot % 2 == 0 {
            corpus.push(cone_function(&anchors[cursor], cap, space)?);
            cursor += 1;
        } else {
            loop {
                if cursor + 1 >= anchors.len() {
                    return Err(Error::Degenerate(
                        "anchor pool exhausted while building witness functions".into(),
                    ));
                }
                let (s, t) = (&anchors[cursor], &anchors[cursor + 1]);
                cursor += 2;
                if space.distance(s, t)? > 0.0 {
                    corpus.push(witness_function(s, t, space)?);
                    break;
                }
            }
        }
        slot += 1;
    }
    Ok(corpus)
}

/// Two smooth random expressions with seeded coefficients; they go through
/// the parser so the corpus exercises it, and they carry exact gradients.
pub fn random_expressions(dim: usize, seed: u64) -> Vec<String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xE59);
    let mut coeff = move || {
        let c: f64 = rng.random::<f64>() * 2.0 - 1.0;
        // Keep printed literals short; parse round-trips regardless.
        (c * 1000.0).round() / 1000.0
    };
    let mut out = Vec::with_capacity(2);
    let second_var = if dim >= 2 { "x1" } else { "x0" };
    out.push(format!(
        "{}*sin({}*x0 + {}) + {}*x0",
        coeff(),
        1.0 + coeff().abs(),
        coeff(),
        coeff()
    ));
    out.push(format!(
        "{}*cos({}*{second_var}) + {}*x0*{second_var}",
        coeff(),
        1.0 + coeff().abs(),
        coeff()
    ));
    out
}

/// Analytic global Lipschitz constants for corpus members on the unit box,
/// where known; used by the lower-bound law tests.
pub fn known_unit_box_constant(label: &str, dim: usize) -> Option<f64> {
    if label.starts_with("const:") {
        return Some(0.0);
    }
    if label.starts_with("coord:") {
        return Some(1.0);
    }
    if label == "tent" {
        return Some(1.0);
    }
    if label.starts_with("cone(") || label.starts_with("witness(") {
        return Some(1.0);
    }
    if label == "product01" {
        // max gradient norm over [0,1]^n is sqrt(2) at (1,1,...).
        return if dim >= 2 {
            Some(std::f64::consts::SQRT_2)
        } else {
            None
        };
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_corpus_shape_on_the_plane() {
        let b = MetricSpace::unit_box(2).unwrap();
        let corpus = probe_corpus(&b, 0, None).unwrap();
        // const + 2 coords + product + 2 exprs + 5 cones + 3 witnesses.
        assert_eq!(corpus.len(), 14);
        assert_eq!(corpus[0].label(), "const:1");
        assert!(corpus.iter().any(|f| f.label() == "product01"));
        assert_eq!(
            corpus
                .iter()
                .filter(|f| f.label().starts_with("cone("))
                .count(),
            5
        );
        assert_eq!(
            corpus
                .iter()
                .filter(|f| f.label().starts_with("witness("))
                .count(),
            3
        );
    }

    #[test]
    fn dimension_one_swaps_product_for_tent() {
        let x = MetricSpace::interval(0.0, 1.0).unwrap();
        let corpus = probe_corpus(&x, 0, None).unwrap();
        assert!(corpus.iter().any(|f| f.label() == "tent"));
    }

    #[test]
    fn target_length_is_exact() {
        let b = MetricSpace::unit_box(2).unwrap();
        for n in [10, 20, 25] {
            let corpus = probe_corpus(&b, 4, Some(n)).unwrap();
            assert_eq!(corpus.len(), n);
        }
    }

    #[test]
    fn corpus_is_deterministic_per_seed() {
        let b = MetricSpace::unit_box(2).unwrap();
        let a = probe_corpus(&b, 9, Some(20)).unwrap();
        let c = probe_corpus(&b, 9, Some(20)).unwrap();
        let labels_a: Vec<_> = a.iter().map(|f| f.label().to_owned()).collect();
        let labels_c: Vec<_> = c.iter().map(|f| f.label().to_owned()).collect();
        assert_eq!(labels_a, labels_c);
    }

    #[test]
    fn builtin_corpus_has_no_expressions() {
        let b = MetricSpace::unit_box(2).unwrap();
        let corpus = builtin_corpus(&b, 3, 10).unwrap();
        assert_eq!(corpus.len(), 10);
        assert!(corpus.iter().all(|f| !f.label().starts_with("expr:")));
        assert!(corpus.iter().any(|f| f.label() == "product01"));
    }

    #[test]
    fn random_expressions_parse_and_are_smooth() {
        for dim in [1, 2, 3] {
            for text in random_expressions(dim, 5) {
                let ast = parse_expr(&text, dim).unwrap();
                assert!(ast.is_smooth(), "{text}");
            }
        }
    }
}
