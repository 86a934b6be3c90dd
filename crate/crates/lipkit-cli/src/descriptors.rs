//! Parsing of space, function, operator, and data-file descriptors.
//!
//! Descriptors are JSON (inline or `@path` to a file) or short builtin
//! strings:
//!
//! - functions: `const:2`, `coord:0`, `product01`, `tent`, `cone`,
//!   `cone:0.5,0.5`, `cone:0.5,0.5:cap=2`, `witness`,
//!   `witness:0.1,0.1;0.9,0.9`, `expr:"sin(x0)*x1"`;
//! - operators: JSON with `source`, `target`, `weight` (function
//!   descriptor), `symbol` (`{"affine": {"alpha","A","b"}}` or
//!   `{"exprs": ["...", ...]}`), or the shorthands `interval:a,b,c,d[:-]`
//!   and `cube:n:index[:-]`;
//! - black boxes: `shift:p1,p2,...` (with `--space`) or `wco:<operator>`.

use crate::CliError;
use lipkit::dilation::{
    cube_symmetry_operator, enumerate_cube_symmetries, interval_canonical, AffineDescriptor,
    AffineMap,
};
use lipkit::expr::parse_expr;
use lipkit::func::{cone_function, witness_function, ScalarFunc};
use lipkit::metric::{MetricSpace, Point, SpaceDescriptor};
use lipkit::wco::{shift_preserver, BlackBoxOperator, Symbol, WCOperator};
use serde::Deserialize;

/// Resolve `@path` indirection: a descriptor starting with `@` is read from
/// the named file.
fn resolve_text(raw: &str) -> Result<String, CliError> {
    if let Some(path) = raw.strip_prefix('@') {
        Ok(std::fs::read_to_string(path)
            .map_err(|e| CliError::Input(format!("cannot read {path}: {e}")))?)
    } else {
        Ok(raw.to_owned())
    }
}

pub fn parse_space(raw: &str) -> Result<MetricSpace, CliError> {
    let text = resolve_text(raw)?;
    let desc: SpaceDescriptor = serde_json::from_str(&text)
        .map_err(|e| CliError::Input(format!("bad space descriptor: {e}")))?;
    Ok(MetricSpace::from_descriptor(&desc)?)
}

pub fn parse_point(space: &MetricSpace, raw: &str) -> Result<Point, CliError> {
    let coords = parse_floats(raw)?;
    Ok(space.point(coords)?)
}

pub fn parse_floats(raw: &str) -> Result<Vec<f64>, CliError> {
    raw.split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|e| CliError::Input(format!("bad number `{s}`: {e}")))
        })
        .collect()
}

/// Default cone cap: the space diameter when bounded, at least 1.
fn default_cap(space: &MetricSpace) -> f64 {
    space.diameter_bound().map(|d| d.max(1.0)).unwrap_or(1.0)
}

pub fn parse_func(space: &MetricSpace, raw: &str, seed: u64) -> Result<ScalarFunc, CliError> {
    let text = resolve_text(raw)?;
    if let Some(expr_text) = text.strip_prefix("expr:") {
        let trimmed = expr_text.trim_matches('"');
        let ast = parse_expr(trimmed, space.dim())?;
        return Ok(ScalarFunc::from_expr(ast, space)?);
    }
    if let Some(value) = text.strip_prefix("const:") {
        let v: f64 = value
            .parse()
            .map_err(|e| CliError::Input(format!("bad constant `{value}`: {e}")))?;
        return Ok(ScalarFunc::constant(v, space));
    }
    if let Some(index) = text.strip_prefix("coord:") {
        let i: usize = index
            .parse()
            .map_err(|e| CliError::Input(format!("bad coordinate index `{index}`: {e}")))?;
        return Ok(ScalarFunc::coordinate(i, space)?);
    }
    match text.as_str() {
        "product01" => return Ok(ScalarFunc::product01(space)?),
        "tent" => return Ok(ScalarFunc::tent(space)?),
        "cone" => {
            let anchor = space
                .sample_points(1, seed)
                .pop()
                .ok_or_else(|| CliError::Input("cannot sample a cone anchor".into()))?;
            return Ok(cone_function(&anchor, default_cap(space), space)?);
        }
        "witness" => {
            let pts = space.sample_points(2, seed);
            return Ok(witness_function(&pts[0], &pts[1], space)?);
        }
        _ => {}
    }
    if let Some(rest) = text.strip_prefix("cone:") {
        let mut parts = rest.splitn(2, ':');
        let coords = parse_floats(parts.next().unwrap())?;
        let cap = match parts.next() {
            Some(cap_part) => {
                let v = cap_part.strip_prefix("cap=").ok_or_else(|| {
                    CliError::Input(format!("expected `cap=<value>`, got `{cap_part}`"))
                })?;
                v.parse::<f64>()
                    .map_err(|e| CliError::Input(format!("bad cap `{v}`: {e}")))?
            }
            None => default_cap(space),
        };
        let anchor = space.point(coords)?;
        return Ok(cone_function(&anchor, cap, space)?);
    }
    if let Some(rest) = text.strip_prefix("witness:") {
        let (s_part, t_part) = rest.split_once(';').ok_or_else(|| {
            CliError::Input("witness needs two points separated by `;`".into())
        })?;
        let s = space.point(parse_floats(s_part)?)?;
        let t = space.point(parse_floats(t_part)?)?;
        return Ok(witness_function(&s, &t, space)?);
    }
    Err(CliError::Input(format!(
        "unknown function descriptor `{text}` (builtins: const:<v>, coord:<i>, product01, \
         tent, cone[:...], witness[:...], expr:\"...\")"
    )))
}

/// JSON operator descriptor.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatorDescriptor {
    pub source: SpaceDescriptor,
    pub target: SpaceDescriptor,
    /// Function descriptor string, evaluated on the target space.
    pub weight: String,
    pub symbol: SymbolDescriptor,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SymbolDescriptor {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub affine: Option<AffineDescriptor>,
    /// Per-output-coordinate expressions in the target space's variables.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exprs: Option<Vec<String>>,
}

pub fn parse_operator(raw: &str, seed: u64) -> Result<WCOperator, CliError> {
    let text = resolve_text(raw)?;
    if let Some(rest) = text.strip_prefix("interval:") {
        let (nums, reflected) = match rest.strip_suffix(":-") {
            Some(head) => (head, true),
            None => (rest, false),
        };
        let v = parse_floats(nums)?;
        if v.len() != 4 {
            return Err(CliError::Input(
                "interval shorthand needs a,b,c,d".into(),
            ));
        }
        let (plus, minus) = interval_canonical(v[0], v[1], v[2], v[3])?;
        return Ok(if reflected { minus } else { plus });
    }
    if let Some(rest) = text.strip_prefix("cube:") {
        let (body, negative) = match rest.strip_suffix(":-") {
            Some(head) => (head, true),
            None => (rest, false),
        };
        let (n_part, idx_part) = body
            .split_once(':')
            .ok_or_else(|| CliError::Input("cube shorthand needs n:index".into()))?;
        let n: usize = n_part
            .parse()
            .map_err(|e| CliError::Input(format!("bad cube dimension: {e}")))?;
        let index: usize = idx_part
            .parse()
            .map_err(|e| CliError::Input(format!("bad cube symmetry index: {e}")))?;
        let maps = enumerate_cube_symmetries(n)?;
        let map = maps.get(index).ok_or_else(|| {
            CliError::Input(format!(
                "cube symmetry index {index} out of range (n={n} has {} maps)",
                maps.len()
            ))
        })?;
        return Ok(cube_symmetry_operator(map, negative)?);
    }
    let desc: OperatorDescriptor = serde_json::from_str(&text)
        .map_err(|e| CliError::Input(format!("bad operator descriptor: {e}")))?;
    build_operator(&desc, seed)
}

pub fn build_operator(desc: &OperatorDescriptor, seed: u64) -> Result<WCOperator, CliError> {
    let source = MetricSpace::from_descriptor(&desc.source)?;
    let target = MetricSpace::from_descriptor(&desc.target)?;
    let weight = parse_func(&target, &desc.weight, seed)?;
    let symbol = match (&desc.symbol.affine, &desc.symbol.exprs) {
        (Some(affine), None) => Symbol::Affine(AffineMap::from_descriptor(affine)?),
        (None, Some(exprs)) => {
            if exprs.len() != source.dim() {
                return Err(CliError::Input(format!(
                    "symbol needs {} expressions (source dimension), got {}",
                    source.dim(),
                    exprs.len()
                )));
            }
            let parsed: Vec<_> = exprs
                .iter()
                .map(|e| parse_expr(e, target.dim()))
                .collect::<Result<_, _>>()?;
            let eval_space = target.clone();
            let label = format!("exprs:{}", exprs.join(" | "));
            Symbol::from_fn(label, move |y| {
                parsed.iter().map(|ast| ast.eval(y, &eval_space)).collect()
            })
        }
        _ => {
            return Err(CliError::Input(
                "symbol must have exactly one of `affine` or `exprs`".into(),
            ))
        }
    };
    Ok(WCOperator::new(weight, symbol, source, target)?)
}

/// Black-box descriptors: `shift:<point>` (needs the shared space) or
/// `wco:<operator descriptor>`.
pub fn parse_blackbox(
    raw: &str,
    space: Option<&MetricSpace>,
    seed: u64,
) -> Result<BlackBoxOperator, CliError> {
    let text = resolve_text(raw)?;
    if let Some(rest) = text.strip_prefix("shift:") {
        let space = space.ok_or_else(|| {
            CliError::Input("shift:<point> needs --space for the shared domain".into())
        })?;
        let x0 = space.point(parse_floats(rest)?)?;
        return Ok(shift_preserver(&x0, space)?);
    }
    if let Some(rest) = text.strip_prefix("wco:") {
        let op = parse_operator(rest, seed)?;
        return Ok(BlackBoxOperator::from_wco(&op));
    }
    Err(CliError::Input(format!(
        "unknown black-box descriptor `{text}` (use shift:<point> or wco:<operator>)"
    )))
}

/// Input/output point pairs for affine recovery.
pub type PointPairs = Vec<(Vec<f64>, Vec<f64>)>;

/// `recover --pairs` file: JSON array of `[[x...],[y...]]` pairs.
pub fn parse_pairs_file(raw: &str) -> Result<PointPairs, CliError> {
    let text = resolve_text(raw)?;
    let parsed: PointPairs = serde_json::from_str(&text)
        .map_err(|e| CliError::Input(format!("bad pairs file: {e}")))?;
    Ok(parsed)
}

/// `classify1d --samples` file: JSON array of `[x, y]` samples.
pub fn parse_samples_file(raw: &str) -> Result<Vec<(f64, f64)>, CliError> {
    let text = resolve_text(raw)?;
    let parsed: Vec<(f64, f64)> = serde_json::from_str(&text)
        .map_err(|e| CliError::Input(format!("bad samples file: {e}")))?;
    Ok(parsed)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn interval_json() -> &'static str {
        r#"{"kind":"interval","dim":1,"params":{"a":0.0,"b":1.0}}"#
    }

    #[test]
    fn space_round_trip() {
        let space = parse_space(interval_json()).unwrap();
        assert_eq!(space.dim(), 1);
    }

    #[test]
    fn rejects_unknown_descriptor_fields() {
        let raw = r#"{"kind":"interval","dim":1,"params":{"a":0,"b":1},"extra":true}"#;
        assert!(parse_space(raw).is_err());
    }

    #[test]
    fn builtin_functions_parse() {
        let space = parse_space(interval_json()).unwrap();
        for desc in ["const:2", "coord:0", "tent", "cone", "cone:0.5", "witness", "expr:x0*x0"] {
            let f = parse_func(&space, desc, 0).unwrap();
            let p = space.point(vec![0.5]).unwrap();
            assert!(f.eval(&p).is_finite(), "{desc}");
        }
    }

    #[test]
    fn operator_shorthands_build() {
        assert!(parse_operator("interval:0,1,0,1", 0).is_ok());
        assert!(parse_operator("interval:0,2,0,1:-", 0).is_ok());
        assert!(parse_operator("cube:2:5", 0).is_ok());
        assert!(parse_operator("cube:2:99", 0).is_err());
    }

    #[test]
    fn expression_symbol_operator_builds() {
        let raw = r#"{
            "source": {"kind":"interval","dim":1,"params":{"a":0.0,"b":1.0}},
            "target": {"kind":"interval","dim":1,"params":{"a":0.0,"b":1.0}},
            "weight": "const:1",
            "symbol": {"exprs": ["x0*x0"]}
        }"#;
        let op = parse_operator(raw, 0).unwrap();
        let y = op.target().point(vec![0.5]).unwrap();
        let f = ScalarFunc::coordinate(0, op.source()).unwrap();
        let tf = op.apply(&f).unwrap();
        assert!((tf.eval(&y) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn blackbox_shift_parses() {
        let space = parse_space(interval_json()).unwrap();
        let op = parse_blackbox("shift:0.0", Some(&space), 0).unwrap();
        assert!(op.label().starts_with("shift"));
    }
}
