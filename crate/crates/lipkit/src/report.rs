//! Canonical JSON values for machine-readable reports.
//!
//! Reports must be byte-identical across runs with the same inputs and seed,
//! so serialization is pinned here rather than left to a serializer's float
//! heuristics: object fields keep insertion order and every float is written
//! with 17 significant digits (`{:.16e}`), enough to round-trip any f64.

use std::fmt::Write as _;

/// A JSON value with deterministic serialization.
#[derive(Debug, Clone, PartialEq)]
pub enum Json {
    Null,
    Bool(bool),
    Int(i64),
    UInt(u64),
    Float(f64),
    Str(String),
    Arr(Vec<Json>),
    Obj(Vec<(String, Json)>),
}

impl Json {
    pub fn obj<I, K>(fields: I) -> Json
    where
        I: IntoIterator<Item = (K, Json)>,
        K: Into<String>,
    {
        Json::Obj(fields.into_iter().map(|(k, v)| (k.into(), v)).collect())
    }

    pub fn arr<I: IntoIterator<Item = Json>>(items: I) -> Json {
        Json::Arr(items.into_iter().collect())
    }

    pub fn floats<'a, I: IntoIterator<Item = &'a f64>>(values: I) -> Json {
        Json::Arr(values.into_iter().map(|&v| Json::Float(v)).collect())
    }

    pub fn str(s: impl Into<String>) -> Json {
        Json::Str(s.into())
    }

    fn write(&self, out: &mut String) {
        match self {
            Json::Null => out.push_str("null"),
            Json::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
            Json::Int(i) => {
                let _ = write!(out, "{i}");
            }
            Json::UInt(u) => {
                let _ = write!(out, "{u}");
            }
            Json::Float(f) => write_float(out, *f),
            Json::Str(s) => write_escaped(out, s),
            Json::Arr(items) => {
                out.push('[');
                for (i, item) in items.iter().enumerate() {
                    if i > 0 {
                        out.push(',');
                    }
                    item.write(out);
                }
                out.push(']');
            }
            Json::Obj(fields) => {
                out.push('{');
                for (i, (key, value)) in fields.iter().enumerate() {
                    if i > 0 {
                        out.push(',');
                    }
                    write_escaped(out, key);
                    out.push(':');
                    value.write(out);
                }
                out.push('}');
            }
        }
    }
}

/// Serializes without any whitespace.
impl std::fmt::Display for Json {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let mut out = String::new();
        self.write(&mut out);
        f.write_str(&out)
    }
}

impl From<f64> for Json {
    fn from(v: f64) -> Json {
        Json::Float(v)
    }
}

impl From<usize> for Json {
    fn from(v: usize) -> Json {
        Json::Int(v as i64)
    }
}

impl From<u64> for Json {
    fn from(v: u64) -> Json {
        Json::UInt(v)
    }
}

impl From<bool> for Json {
    fn from(v: bool) -> Json {
        Json::Bool(v)
    }
}

impl From<&str> for Json {
    fn from(v: &str) -> Json {
        Json::Str(v.to_owned())
    }
}

/// Floats are serialized as `d.dddddddddddddddde±e` (17 significant digits).
/// JSON has no representation for non-finite values; they surface as errors
/// long before serialization, so this panics to catch programming mistakes.
fn write_float(out: &mut String, f: f64) {
    assert!(f.is_finite(), "report floats must be finite, got {f}");
    let _ = write!(out, "{f:.16e}");
}

fn write_escaped(out: &mut String, s: &str) {
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            '\t' => out.push_str("\\t"),
            c if (c as u32) < 0x20 => {
                let _ = write!(out, "\\u{:04x}", c as u32);
            }
            c => out.push(c),
        }
    }
    out.push('"');
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_have_17_significant_digits() {
        assert_eq!(Json::Float(1.0).to_string(), "1.0000000000000000e0");
        assert_eq!(Json::Float(0.2).to_string(), "2.0000000000000001e-1");
    }

    #[test]
    fn field_order_is_preserved() {
        let v = Json::obj([("b", Json::Int(1)), ("a", Json::Int(2))]);
        assert_eq!(v.to_string(), "{\"b\":1,\"a\":2}");
    }

    #[test]
    fn float_round_trips_through_17_digits() {
        for &x in &[std::f64::consts::PI, 0.1, 1.0 / 3.0, 1e-300, 12345.6789] {
            let s = format!("{x:.16e}");
            let back: f64 = s.parse().unwrap();
            assert_eq!(back.to_bits(), x.to_bits(), "{s} did not round-trip");
        }
    }

    #[test]
    fn strings_are_escaped() {
        let v = Json::str("a\"b\\c\nd");
        assert_eq!(v.to_string(), "\"a\\\"b\\\\c\\nd\"");
    }
}
