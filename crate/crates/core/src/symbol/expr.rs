//! Real-valued spatial expressions in `xi1..xi9` and `abs_xi`.
//!
//! Grammar:
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := factor (('*' | '/') factor)*
//! factor := atom ('^' number)?
//! atom   := number | 'xi' digit | 'abs_xi' | func '(' expr ')' | '(' expr ')' | '-' atom
//! func   := 'sqrt' | 'exp'
//! ```
//!
//! The exponent may carry a leading minus sign (`abs_xi^-3`).

use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    /// Component `xi_j`, 1-based.
    Xi(usize),
    AbsXi,
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, f64),
    Sqrt(Box<Expr>),
    Exp(Box<Expr>),
}

/// Parsed expression together with its canonical text.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialExpr {
    ast: Expr,
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
}

fn lex(src: &str) -> Result<Vec<(usize, Tok)>> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        let start = i;
        match c {
            b' ' | b'\t' | b'\n' | b'\r' => {
                i += 1;
                continue;
            }
            b'+' => out.push((start, Tok::Plus)),
            b'-' => out.push((start, Tok::Minus)),
            b'*' => out.push((start, Tok::Star)),
            b'/' => out.push((start, Tok::Slash)),
            b'^' => out.push((start, Tok::Caret)),
            b'(' => out.push((start, Tok::LParen)),
            b')' => out.push((start, Tok::RParen)),
            b'0'..=b'9' | b'.' => {
                while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                    i += 1;
                }
                if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                    let mut j = i + 1;
                    if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                        j += 1;
                    }
                    if j < bytes.len() && bytes[j].is_ascii_digit() {
                        while j < bytes.len() && bytes[j].is_ascii_digit() {
                            j += 1;
                        }
                        i = j;
                    }
                }
                let text = &src[start..i];
                let v: f64 = text.parse().map_err(|_| Error::Syntax {
                    offset: start,
                    message: format!("malformed number `{text}`"),
                })?;
                out.push((start, Tok::Num(v)));
                continue;
            }
            c if c.is_ascii_alphabetic() || c == b'_' => {
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                out.push((start, Tok::Ident(src[start..i].to_string())));
                continue;
            }
            _ => {
                return Err(Error::Syntax {
                    offset: start,
                    message: format!("unexpected character `{}`", src[start..].chars().next().unwrap_or('?')),
                })
            }
        }
        i += 1;
    }
    Ok(out)
}

struct Parser<'a> {
    toks: Vec<(usize, Tok)>,
    pos: usize,
    src: &'a str,
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(_, t)| t)
    }

    fn offset(&self) -> usize {
        self.toks.get(self.pos).map(|(o, _)| *o).unwrap_or(self.src.len())
    }

    fn syntax<T>(&self, message: impl Into<String>) -> Result<T> {
        Err(Error::Syntax { offset: self.offset(), message: message.into() })
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<()> {
        if self.peek() == Some(&tok) {
            self.pos += 1;
            Ok(())
        } else {
            self.syntax(format!("expected {what}"))
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Some(Tok::Plus) => {
                    self.pos += 1;
                    lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
                }
                Some(Tok::Minus) => {
                    self.pos += 1;
                    lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.factor()?;
        loop {
            match self.peek() {
                Some(Tok::Star) => {
                    self.pos += 1;
                    lhs = Expr::Mul(Box::new(lhs), Box::new(self.factor()?));
                }
                Some(Tok::Slash) => {
                    self.pos += 1;
                    lhs = Expr::Div(Box::new(lhs), Box::new(self.factor()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn factor(&mut self) -> Result<Expr> {
        let base = self.atom()?;
        if self.peek() == Some(&Tok::Caret) {
            self.pos += 1;
            let negative = if self.peek() == Some(&Tok::Minus) {
                self.pos += 1;
                true
            } else {
                false
            };
            match self.peek() {
                Some(&Tok::Num(v)) => {
                    self.pos += 1;
                    Ok(Expr::Pow(Box::new(base), if negative { -v } else { v }))
                }
                _ => self.syntax("expected a number after `^`"),
            }
        } else {
            Ok(base)
        }
    }

    fn atom(&mut self) -> Result<Expr> {
        let offset = self.offset();
        match self.peek().cloned() {
            Some(Tok::Num(v)) => {
                self.pos += 1;
                Ok(Expr::Num(v))
            }
            Some(Tok::Minus) => {
                self.pos += 1;
                // Unary minus binds looser than `^`, so `-x^2` is `-(x^2)`.
                Ok(Expr::Neg(Box::new(self.factor()?)))
            }
            Some(Tok::LParen) => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(e)
            }
            Some(Tok::Ident(name)) => {
                self.pos += 1;
                match name.as_str() {
                    "abs_xi" => Ok(Expr::AbsXi),
                    "sqrt" | "exp" => {
                        self.expect(Tok::LParen, "`(` after function name")?;
                        let arg = Box::new(self.expr()?);
                        self.expect(Tok::RParen, "`)`")?;
                        Ok(if name == "sqrt" { Expr::Sqrt(arg) } else { Expr::Exp(arg) })
                    }
                    _ => {
                        let b = name.as_bytes();
                        if b.len() == 3 && name.starts_with("xi") && (b'1'..=b'9').contains(&b[2]) {
                            Ok(Expr::Xi((b[2] - b'0') as usize))
                        } else if name.starts_with("xi") && b.len() > 2 && b[2..].iter().all(u8::is_ascii_digit) {
                            Err(Error::Syntax {
                                offset,
                                message: format!("`{name}`: components are xi1..xi9"),
                            })
                        } else {
                            Err(Error::UnknownIdentifier(name))
                        }
                    }
                }
            }
            Some(tok) => self.syntax(format!("unexpected token {tok:?}")),
            None => self.syntax("unexpected end of input"),
        }
    }
}

pub fn parse(src: &str) -> Result<Expr> {
    let toks = lex(src)?;
    let mut p = Parser { toks, pos: 0, src };
    let e = p.expr()?;
    if p.pos != p.toks.len() {
        return p.syntax("trailing input");
    }
    Ok(e)
}

// Precedence levels used by the printer.
const SUM: u8 = 0;
const PRODUCT: u8 = 1;
const NEG: u8 = 2;
const ATOM: u8 = 3;

fn fmt_num(v: f64) -> String {
    format!("{v}")
}

impl Expr {
    fn level(&self) -> u8 {
        match self {
            Expr::Add(..) | Expr::Sub(..) => SUM,
            Expr::Mul(..) | Expr::Div(..) => PRODUCT,
            Expr::Pow(..) => PRODUCT,
            Expr::Neg(..) => NEG,
            Expr::Num(v) if *v < 0.0 => NEG,
            _ => ATOM,
        }
    }

    fn write(&self, out: &mut String, min_level: u8) {
        let paren = self.level() < min_level;
        if paren {
            out.push('(');
        }
        match self {
            Expr::Num(v) => out.push_str(&fmt_num(*v)),
            Expr::Xi(j) => {
                out.push_str("xi");
                out.push_str(&j.to_string());
            }
            Expr::AbsXi => out.push_str("abs_xi"),
            Expr::Neg(a) => {
                out.push('-');
                a.write_factor(out);
            }
            Expr::Add(a, b) => {
                a.write(out, SUM);
                out.push_str(" + ");
                b.write(out, PRODUCT);
            }
            Expr::Sub(a, b) => {
                a.write(out, SUM);
                out.push_str(" - ");
                b.write(out, PRODUCT);
            }
            Expr::Mul(a, b) => {
                a.write(out, PRODUCT);
                out.push('*');
                b.write_factor(out);
            }
            Expr::Div(a, b) => {
                a.write(out, PRODUCT);
                out.push('/');
                b.write_factor(out);
            }
            Expr::Pow(a, p) => {
                a.write(out, ATOM);
                out.push('^');
                out.push_str(&fmt_num(*p));
            }
            Expr::Sqrt(a) => {
                out.push_str("sqrt(");
                a.write(out, SUM);
                out.push(')');
            }
            Expr::Exp(a) => {
                out.push_str("exp(");
                a.write(out, SUM);
                out.push(')');
            }
        }
        if paren {
            out.push(')');
        }
    }

    // Right operand of `*` or `/`: a single factor.
    fn write_factor(&self, out: &mut String) {
        match self {
            Expr::Pow(..) => self.write(out, PRODUCT),
            _ => self.write(out, ATOM),
        }
    }

    /// Largest `xi` index referenced (0 if none).
    pub fn max_component(&self) -> usize {
        match self {
            Expr::Xi(j) => *j,
            Expr::Num(_) | Expr::AbsXi => 0,
            Expr::Neg(a) | Expr::Pow(a, _) | Expr::Sqrt(a) | Expr::Exp(a) => a.max_component(),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                a.max_component().max(b.max_component())
            }
        }
    }

    /// Evaluate at an integer frequency. `None` outside the domain.
    pub fn eval(&self, xi: &[i64]) -> Option<f64> {
        let v = match self {
            Expr::Num(v) => *v,
            Expr::Xi(j) => *xi.get(j - 1)? as f64,
            Expr::AbsXi => {
                let s: i128 = xi.iter().map(|&x| (x as i128) * (x as i128)).sum();
                (s as f64).sqrt()
            }
            Expr::Neg(a) => -a.eval(xi)?,
            Expr::Add(a, b) => a.eval(xi)? + b.eval(xi)?,
            Expr::Sub(a, b) => a.eval(xi)? - b.eval(xi)?,
            Expr::Mul(a, b) => a.eval(xi)? * b.eval(xi)?,
            Expr::Div(a, b) => {
                let d = b.eval(xi)?;
                if d == 0.0 {
                    return None;
                }
                a.eval(xi)? / d
            }
            Expr::Pow(a, p) => {
                let base = a.eval(xi)?;
                if p.fract() == 0.0 && p.abs() <= i32::MAX as f64 {
                    if base == 0.0 && *p < 0.0 {
                        return None;
                    }
                    base.powi(*p as i32)
                } else {
                    if base < 0.0 || (base == 0.0 && *p < 0.0) {
                        return None;
                    }
                    base.powf(*p)
                }
            }
            Expr::Sqrt(a) => {
                let x = a.eval(xi)?;
                if x < 0.0 {
                    return None;
                }
                x.sqrt()
            }
            Expr::Exp(a) => a.eval(xi)?.exp(),
        };
        v.is_finite().then_some(v)
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut s = String::new();
        self.write(&mut s, SUM);
        f.write_str(&s)
    }
}

impl SpatialExpr {
    pub fn parse(src: &str) -> Result<Self> {
        Ok(SpatialExpr { ast: parse(src)? })
    }

    pub fn from_ast(ast: Expr) -> Self {
        SpatialExpr { ast }
    }

    pub fn constant(v: f64) -> Self {
        SpatialExpr { ast: Expr::Num(v) }
    }

    pub fn ast(&self) -> &Expr {
        &self.ast
    }

    /// Canonical text; `parse(pretty(e))` prints back to the same string.
    pub fn pretty(&self) -> String {
        self.ast.to_string()
    }

    pub fn eval(&self, xi: &[i64]) -> Result<f64> {
        self.ast.eval(xi).ok_or_else(|| Error::EvalDomain { xi: xi.to_vec(), expr: self.pretty() })
    }

    pub fn max_component(&self) -> usize {
        self.ast.max_component()
    }

    pub fn is_zero(&self) -> bool {
        self.ast == Expr::Num(0.0)
    }
}

impl fmt::Display for SpatialExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.ast.fmt(f)
    }
}

impl Serialize for SpatialExpr {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.pretty())
    }
}

impl<'de> Deserialize<'de> for SpatialExpr {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        SpatialExpr::parse(&s).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn evaluates_the_documented_examples() {
        let e = SpatialExpr::parse("2*xi1 - xi2").unwrap();
        assert_eq!(e.eval(&[3, 1]).unwrap(), 5.0);
        let e = SpatialExpr::parse("sqrt(abs_xi)").unwrap();
        assert_eq!(e.eval(&[4]).unwrap(), 2.0);
        let e = SpatialExpr::parse("exp(-abs_xi^2)").unwrap();
        assert!((e.eval(&[1]).unwrap() - (-1f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn reports_errors_with_offsets() {
        match parse("2*xi1 +") {
            Err(Error::Syntax { offset, .. }) => assert_eq!(offset, 7),
            other => panic!("{other:?}"),
        }
        assert!(matches!(parse("foo(xi1)"), Err(Error::UnknownIdentifier(n)) if n == "foo"));
        assert!(matches!(parse("(xi1"), Err(Error::Syntax { offset: 4, .. })));
        assert!(matches!(parse("xi1 $"), Err(Error::Syntax { offset: 4, .. })));
    }

    #[test]
    fn domain_errors() {
        let e = SpatialExpr::parse("1/xi1").unwrap();
        assert!(matches!(e.eval(&[0]), Err(Error::EvalDomain { .. })));
        let e = SpatialExpr::parse("sqrt(xi1)").unwrap();
        assert!(e.eval(&[-1]).is_err());
    }

    #[test]
    fn pretty_print_is_a_fixed_point() {
        for src in [
            "1 - (2 - 3)",
            "xi1/(xi2*3)",
            "-xi1^2",
            "-(xi1 + 1)",
            "(xi1^2)^3",
            "exp(-abs_xi)*sqrt(2)",
            "abs_xi^-3",
            "1/2/3",
            "0.5*xi1 + 0.3*xi2",
        ] {
            let once = SpatialExpr::parse(src).unwrap().pretty();
            let twice = SpatialExpr::parse(&once).unwrap().pretty();
            assert_eq!(once, twice, "{src}");
            let a = SpatialExpr::parse(src).unwrap().eval(&[3, 2]);
            let b = SpatialExpr::parse(&once).unwrap().eval(&[3, 2]);
            assert_eq!(a.ok(), b.ok(), "{src}");
        }
    }
}
