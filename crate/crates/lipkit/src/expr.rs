//! Parsing, evaluation, and differentiation of scalar expressions.
//!
//! The grammar (EBNF, whitespace insignificant, no implicit multiplication):
//!
//! ```text
//! expr   := mul (("+" | "-") mul)*
//! mul    := pow (("*" | "/") pow)*
//! pow    := unary ("^" unary)*            // left-associative
//! unary  := "-" unary | atom
//! atom   := number | variable | call | "(" expr ")"
//! call   := name "(" expr ("," expr)* ")"
//! name   := "min" | "max" | "pow" | "abs" | "sin" | "cos" | "dist"
//! variable := "x" digits                  // x0 .. x{dim-1}
//! number := digits ["." digits] [("e"|"E") ["+"|"-"] digits]
//! ```
//!
//! Precedence is add/sub < mul/div < pow < unary minus, all binary operators
//! left-associative, so `-x0^2` is `(-x0)^2`. `dist(c1, ..., cn)` takes `dim`
//! constant arguments and evaluates the owning space's metric from the point
//! being evaluated to that constant point, so expressions can encode cone
//! functions on quotient spaces.

use crate::error::{Error, Result};
use crate::metric::MetricSpace;
use std::fmt;

/// Expression tree. All nodes are scalar-valued.
#[derive(Debug, Clone, PartialEq)]
pub enum ExprAst {
    Const(f64),
    Var(usize),
    Neg(Box<ExprAst>),
    Add(Box<ExprAst>, Box<ExprAst>),
    Sub(Box<ExprAst>, Box<ExprAst>),
    Mul(Box<ExprAst>, Box<ExprAst>),
    Div(Box<ExprAst>, Box<ExprAst>),
    Pow(Box<ExprAst>, Box<ExprAst>),
    Min(Box<ExprAst>, Box<ExprAst>),
    Max(Box<ExprAst>, Box<ExprAst>),
    Abs(Box<ExprAst>),
    Sin(Box<ExprAst>),
    Cos(Box<ExprAst>),
    /// Distance from the evaluation point to a fixed point, in the owning
    /// space's metric.
    DistTo(Vec<f64>),
}

impl ExprAst {
    /// Evaluate at coordinates `x`; `space` supplies the metric for
    /// [`ExprAst::DistTo`] nodes.
    pub fn eval(&self, x: &[f64], space: &MetricSpace) -> f64 {
        match self {
            ExprAst::Const(c) => *c,
            ExprAst::Var(i) => x[*i],
            ExprAst::Neg(a) => -a.eval(x, space),
            ExprAst::Add(a, b) => a.eval(x, space) + b.eval(x, space),
            ExprAst::Sub(a, b) => a.eval(x, space) - b.eval(x, space),
            ExprAst::Mul(a, b) => a.eval(x, space) * b.eval(x, space),
            ExprAst::Div(a, b) => a.eval(x, space) / b.eval(x, space),
            ExprAst::Pow(a, b) => a.eval(x, space).powf(b.eval(x, space)),
            ExprAst::Min(a, b) => a.eval(x, space).min(b.eval(x, space)),
            ExprAst::Max(a, b) => a.eval(x, space).max(b.eval(x, space)),
            ExprAst::Abs(a) => a.eval(x, space).abs(),
            ExprAst::Sin(a) => a.eval(x, space).sin(),
            ExprAst::Cos(a) => a.eval(x, space).cos(),
            ExprAst::DistTo(p) => space.distance_coords(x, p),
        }
    }

    /// Whether an exact gradient is available. Trees containing `min`, `max`,
    /// or `dist` are not differentiated (their subgradients would be silently
    /// wrong on kinks and quotient cuts).
    pub fn is_smooth(&self) -> bool {
        match self {
            ExprAst::Const(_) | ExprAst::Var(_) => true,
            ExprAst::Neg(a) | ExprAst::Abs(a) | ExprAst::Sin(a) | ExprAst::Cos(a) => a.is_smooth(),
            ExprAst::Add(a, b)
            | ExprAst::Sub(a, b)
            | ExprAst::Mul(a, b)
            | ExprAst::Div(a, b)
            | ExprAst::Pow(a, b) => a.is_smooth() && b.is_smooth(),
            ExprAst::Min(_, _) | ExprAst::Max(_, _) | ExprAst::DistTo(_) => false,
        }
    }

    /// Exact gradient by forward-mode differentiation, one pass per
    /// coordinate. Callers must ensure [`ExprAst::is_smooth`].
    pub fn grad(&self, x: &[f64], dim: usize) -> Vec<f64> {
        (0..dim).map(|i| self.eval_dual(x, i).1).collect()
    }

    /// Value and partial derivative with respect to `x[i]`.
    fn eval_dual(&self, x: &[f64], i: usize) -> (f64, f64) {
        match self {
            ExprAst::Const(c) => (*c, 0.0),
            ExprAst::Var(j) => (x[*j], if *j == i { 1.0 } else { 0.0 }),
            ExprAst::Neg(a) => {
                let (v, d) = a.eval_dual(x, i);
                (-v, -d)
            }
            ExprAst::Add(a, b) => {
                let (va, da) = a.eval_dual(x, i);
                let (vb, db) = b.eval_dual(x, i);
                (va + vb, da + db)
            }
            ExprAst::Sub(a, b) => {
                let (va, da) = a.eval_dual(x, i);
                let (vb, db) = b.eval_dual(x, i);
                (va - vb, da - db)
            }
            ExprAst::Mul(a, b) => {
                let (va, da) = a.eval_dual(x, i);
                let (vb, db) = b.eval_dual(x, i);
                (va * vb, da * vb + va * db)
            }
            ExprAst::Div(a, b) => {
                let (va, da) = a.eval_dual(x, i);
                let (vb, db) = b.eval_dual(x, i);
                (va / vb, (da * vb - va * db) / (vb * vb))
            }
            ExprAst::Pow(a, b) => {
                let (va, da) = a.eval_dual(x, i);
                if let ExprAst::Const(c) = **b {
                    (va.powf(c), c * va.powf(c - 1.0) * da)
                } else {
                    let (vb, db) = b.eval_dual(x, i);
                    let v = va.powf(vb);
                    (v, v * (db * va.ln() + vb * da / va))
                }
            }
            ExprAst::Abs(a) => {
                let (v, d) = a.eval_dual(x, i);
                (v.abs(), v.signum() * d * if v == 0.0 { 0.0 } else { 1.0 })
            }
            ExprAst::Sin(a) => {
                let (v, d) = a.eval_dual(x, i);
                (v.sin(), v.cos() * d)
            }
            ExprAst::Cos(a) => {
                let (v, d) = a.eval_dual(x, i);
                (v.cos(), -v.sin() * d)
            }
            ExprAst::Min(_, _) | ExprAst::Max(_, _) | ExprAst::DistTo(_) => {
                unreachable!("grad is only called on smooth trees")
            }
        }
    }

    /// Largest variable index + 1, the minimum dimension that can host the
    /// expression.
    pub fn min_dim(&self) -> usize {
        match self {
            ExprAst::Const(_) | ExprAst::DistTo(_) => 0,
            ExprAst::Var(i) => i + 1,
            ExprAst::Neg(a) | ExprAst::Abs(a) | ExprAst::Sin(a) | ExprAst::Cos(a) => a.min_dim(),
            ExprAst::Add(a, b)
            | ExprAst::Sub(a, b)
            | ExprAst::Mul(a, b)
            | ExprAst::Div(a, b)
            | ExprAst::Pow(a, b)
            | ExprAst::Min(a, b)
            | ExprAst::Max(a, b) => a.min_dim().max(b.min_dim()),
        }
    }

    /// Visit all `dist` anchor points.
    pub fn dist_anchors(&self) -> Vec<&Vec<f64>> {
        let mut out = Vec::new();
        self.collect_anchors(&mut out);
        out
    }

    fn collect_anchors<'a>(&'a self, out: &mut Vec<&'a Vec<f64>>) {
        match self {
            ExprAst::DistTo(p) => out.push(p),
            ExprAst::Const(_) | ExprAst::Var(_) => {}
            ExprAst::Neg(a) | ExprAst::Abs(a) | ExprAst::Sin(a) | ExprAst::Cos(a) => {
                a.collect_anchors(out)
            }
            ExprAst::Add(a, b)
            | ExprAst::Sub(a, b)
            | ExprAst::Mul(a, b)
            | ExprAst::Div(a, b)
            | ExprAst::Pow(a, b)
            | ExprAst::Min(a, b)
            | ExprAst::Max(a, b) => {
                a.collect_anchors(out);
                b.collect_anchors(out);
            }
        }
    }
}

/// Fully parenthesized pretty-printer; re-parsing the output yields a
/// structurally equal tree (literal negation is folded into constants on
/// both sides).
impl fmt::Display for ExprAst {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExprAst::Const(c) => write!(f, "{c}"),
            ExprAst::Var(i) => write!(f, "x{i}"),
            ExprAst::Neg(a) => write!(f, "(-{a})"),
            ExprAst::Add(a, b) => write!(f, "({a} + {b})"),
            ExprAst::Sub(a, b) => write!(f, "({a} - {b})"),
            ExprAst::Mul(a, b) => write!(f, "({a} * {b})"),
            ExprAst::Div(a, b) => write!(f, "({a} / {b})"),
            ExprAst::Pow(a, b) => write!(f, "({a} ^ {b})"),
            ExprAst::Min(a, b) => write!(f, "min({a}, {b})"),
            ExprAst::Max(a, b) => write!(f, "max({a}, {b})"),
            ExprAst::Abs(a) => write!(f, "abs({a})"),
            ExprAst::Sin(a) => write!(f, "sin({a})"),
            ExprAst::Cos(a) => write!(f, "cos({a})"),
            ExprAst::DistTo(p) => {
                write!(f, "dist(")?;
                for (i, c) in p.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{c}")?;
                }
                write!(f, ")")
            }
        }
    }
}

/// Parse `text` as an expression over variables `x0 .. x{dim-1}`.
pub fn parse_expr(text: &str, dim: usize) -> Result<ExprAst> {
    if text.trim().is_empty() {
        return Err(Error::Parse {
            offset: 0,
            message: "empty expression".into(),
        });
    }
    let tokens = lex(text)?;
    let mut parser = Parser {
        tokens: &tokens,
        pos: 0,
        dim,
        text_len: text.len(),
    };
    let ast = parser.expr()?;
    if parser.pos < parser.tokens.len() {
        let tok = &parser.tokens[parser.pos];
        return Err(Error::Parse {
            offset: tok.offset,
            message: format!("unexpected trailing input starting at `{}`", tok.kind),
        });
    }
    Ok(ast)
}

#[derive(Debug, Clone, PartialEq)]
enum TokenKind {
    Num(f64),
    Ident(String),
    LParen,
    RParen,
    Comma,
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
}

impl fmt::Display for TokenKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TokenKind::Num(v) => write!(f, "{v}"),
            TokenKind::Ident(s) => write!(f, "{s}"),
            TokenKind::LParen => write!(f, "("),
            TokenKind::RParen => write!(f, ")"),
            TokenKind::Comma => write!(f, ","),
            TokenKind::Plus => write!(f, "+"),
            TokenKind::Minus => write!(f, "-"),
            TokenKind::Star => write!(f, "*"),
            TokenKind::Slash => write!(f, "/"),
            TokenKind::Caret => write!(f, "^"),
        }
    }
}

struct Token {
    kind: TokenKind,
    offset: usize,
}

fn lex(text: &str) -> Result<Vec<Token>> {
    let bytes = text.as_bytes();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        let start = i;
        match c {
            b' ' | b'\t' | b'\n' | b'\r' => {
                i += 1;
            }
            b'(' | b')' | b',' | b'+' | b'-' | b'*' | b'/' | b'^' => {
                let kind = match c {
                    b'(' => TokenKind::LParen,
                    b')' => TokenKind::RParen,
                    b',' => TokenKind::Comma,
                    b'+' => TokenKind::Plus,
                    b'-' => TokenKind::Minus,
                    b'*' => TokenKind::Star,
                    b'/' => TokenKind::Slash,
                    _ => TokenKind::Caret,
                };
                tokens.push(Token {
                    kind,
                    offset: start,
                });
                i += 1;
            }
            b'0'..=b'9' => {
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
                if i < bytes.len() && bytes[i] == b'.' {
                    i += 1;
                    while i < bytes.len() && bytes[i].is_ascii_digit() {
                        i += 1;
                    }
                }
                if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                    let mut j = i + 1;
                    if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                        j += 1;
                    }
                    if j < bytes.len() && bytes[j].is_ascii_digit() {
                        i = j;
                        while i < bytes.len() && bytes[i].is_ascii_digit() {
                            i += 1;
                        }
                    }
                }
                let literal = &text[start..i];
                let value: f64 = literal.parse().map_err(|_| Error::Parse {
                    offset: start,
                    message: format!("invalid number literal `{literal}`"),
                })?;
                tokens.push(Token {
                    kind: TokenKind::Num(value),
                    offset: start,
                });
            }
            b'a'..=b'z' | b'A'..=b'Z' | b'_' => {
                while i < bytes.len()
                    && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_')
                {
                    i += 1;
                }
                tokens.push(Token {
                    kind: TokenKind::Ident(text[start..i].to_owned()),
                    offset: start,
                });
            }
            other => {
                return Err(Error::Parse {
                    offset: start,
                    message: format!("unexpected character `{}`", other as char),
                });
            }
        }
    }
    Ok(tokens)
}

struct Parser<'a> {
    tokens: &'a [Token],
    pos: usize,
    dim: usize,
    text_len: usize,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&TokenKind> {
        self.tokens.get(self.pos).map(|t| &t.kind)
    }

    fn offset(&self) -> usize {
        self.tokens
            .get(self.pos)
            .map(|t| t.offset)
            .unwrap_or(self.text_len)
    }

    fn bump(&mut self) -> &TokenKind {
        let t = &self.tokens[self.pos].kind;
        self.pos += 1;
        t
    }

    fn expect(&mut self, kind: TokenKind, what: &str) -> Result<()> {
        if self.peek() == Some(&kind) {
            self.pos += 1;
            Ok(())
        } else {
            Err(Error::Parse {
                offset: self.offset(),
                message: format!("expected {what}"),
            })
        }
    }

    fn expr(&mut self) -> Result<ExprAst> {
        let mut lhs = self.mul()?;
        loop {
            match self.peek() {
                Some(TokenKind::Plus) => {
                    self.pos += 1;
                    lhs = ExprAst::Add(Box::new(lhs), Box::new(self.mul()?));
                }
                Some(TokenKind::Minus) => {
                    self.pos += 1;
                    lhs = ExprAst::Sub(Box::new(lhs), Box::new(self.mul()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn mul(&mut self) -> Result<ExprAst> {
        let mut lhs = self.pow()?;
        loop {
            match self.peek() {
                Some(TokenKind::Star) => {
                    self.pos += 1;
                    lhs = ExprAst::Mul(Box::new(lhs), Box::new(self.pow()?));
                }
                Some(TokenKind::Slash) => {
                    self.pos += 1;
                    lhs = ExprAst::Div(Box::new(lhs), Box::new(self.pow()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn pow(&mut self) -> Result<ExprAst> {
        let mut lhs = self.unary()?;
        while self.peek() == Some(&TokenKind::Caret) {
            self.pos += 1;
            lhs = ExprAst::Pow(Box::new(lhs), Box::new(self.unary()?));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<ExprAst> {
        if self.peek() == Some(&TokenKind::Minus) {
            self.pos += 1;
            let inner = self.unary()?;
            // Fold literal negation so pretty-printed constants round-trip.
            return Ok(match inner {
                ExprAst::Const(c) => ExprAst::Const(-c),
                other => ExprAst::Neg(Box::new(other)),
            });
        }
        self.atom()
    }

    fn atom(&mut self) -> Result<ExprAst> {
        let offset = self.offset();
        match self.peek() {
            Some(TokenKind::Num(_)) => {
                if let TokenKind::Num(v) = self.bump() {
                    Ok(ExprAst::Const(*v))
                } else {
                    unreachable!()
                }
            }
            Some(TokenKind::LParen) => {
                self.pos += 1;
                let inner = self.expr()?;
                self.expect(TokenKind::RParen, "closing `)`")?;
                Ok(inner)
            }
            Some(TokenKind::Ident(_)) => {
                let name = if let TokenKind::Ident(s) = self.bump() {
                    s.clone()
                } else {
                    unreachable!()
                };
                if self.peek() == Some(&TokenKind::LParen) {
                    self.call(&name, offset)
                } else {
                    self.variable(&name, offset)
                }
            }
            Some(other) => Err(Error::Parse {
                offset,
                message: format!("expected a value, found `{other}`"),
            }),
            None => Err(Error::Parse {
                offset,
                message: "unexpected end of expression".into(),
            }),
        }
    }

    fn variable(&mut self, name: &str, offset: usize) -> Result<ExprAst> {
        let index = name
            .strip_prefix('x')
            .and_then(|rest| rest.parse::<usize>().ok())
            .ok_or_else(|| Error::Parse {
                offset,
                message: format!("unknown identifier `{name}`"),
            })?;
        if index >= self.dim {
            return Err(Error::Parse {
                offset,
                message: format!(
                    "variable index {index} out of range for dimension {}",
                    self.dim
                ),
            });
        }
        Ok(ExprAst::Var(index))
    }

    fn call(&mut self, name: &str, offset: usize) -> Result<ExprAst> {
        self.expect(TokenKind::LParen, "`(`")?;
        let mut args = vec![self.expr()?];
        while self.peek() == Some(&TokenKind::Comma) {
            self.pos += 1;
            args.push(self.expr()?);
        }
        self.expect(TokenKind::RParen, "closing `)`")?;
        let arity_err = |want: usize| Error::Parse {
            offset,
            message: format!("`{name}` takes {want} argument(s), got {}", args.len()),
        };
        match name {
            "min" | "max" | "pow" => {
                if args.len() != 2 {
                    return Err(arity_err(2));
                }
                let b = Box::new(args.pop().unwrap());
                let a = Box::new(args.pop().unwrap());
                Ok(match name {
                    "min" => ExprAst::Min(a, b),
                    "max" => ExprAst::Max(a, b),
                    _ => ExprAst::Pow(a, b),
                })
            }
            "abs" | "sin" | "cos" => {
                if args.len() != 1 {
                    return Err(arity_err(1));
                }
                let a = Box::new(args.pop().unwrap());
                Ok(match name {
                    "abs" => ExprAst::Abs(a),
                    "sin" => ExprAst::Sin(a),
                    _ => ExprAst::Cos(a),
                })
            }
            "dist" => {
                if args.len() != self.dim {
                    return Err(Error::Parse {
                        offset,
                        message: format!(
                            "`dist` takes {} argument(s) (one per dimension), got {}",
                            self.dim,
                            args.len()
                        ),
                    });
                }
                let mut point = Vec::with_capacity(args.len());
                for arg in &args {
                    match arg {
                        ExprAst::Const(c) => point.push(*c),
                        _ => {
                            return Err(Error::Parse {
                                offset,
                                message: "`dist` arguments must be constants".into(),
                            });
                        }
                    }
                }
                Ok(ExprAst::DistTo(point))
            }
            other => Err(Error::Parse {
                offset,
                message: format!("unknown function `{other}`"),
            }),
        }
    }
}
