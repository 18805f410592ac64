//! Loop bound expressions.
//!
//! Accepted forms are `lit`, `ident`, `-ident`, `ident+lit`, `ident-lit` and
//! `lit*ident`, optionally wrapped in one pair of parentheses. Everything is
//! stored as the affine form `scale * sym + offset`.

use std::collections::BTreeMap;
use std::fmt;

/// A loop bound, `scale * sym + offset` or a plain literal.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BoundExpr {
    scale: i64,
    sym: Option<String>,
    offset: i64,
}

impl BoundExpr {
    pub fn literal(value: i64) -> Self {
        BoundExpr {
            scale: 0,
            sym: None,
            offset: value,
        }
    }

    pub fn symbol(name: impl Into<String>) -> Self {
        BoundExpr {
            scale: 1,
            sym: Some(name.into()),
            offset: 0,
        }
    }

    pub fn negated_symbol(name: impl Into<String>) -> Self {
        BoundExpr {
            scale: -1,
            sym: Some(name.into()),
            offset: 0,
        }
    }

    pub fn shifted(name: impl Into<String>, delta: i64) -> Self {
        BoundExpr {
            scale: 1,
            sym: Some(name.into()),
            offset: delta,
        }
    }

    pub fn scaled(factor: i64, name: impl Into<String>) -> Self {
        BoundExpr {
            scale: factor,
            sym: Some(name.into()),
            offset: 0,
        }
    }

    /// The identifier referenced by this bound, if any.
    pub fn symbol_name(&self) -> Option<&str> {
        self.sym.as_deref()
    }

    pub fn as_literal(&self) -> Option<i64> {
        match self.sym {
            None => Some(self.offset),
            Some(_) => None,
        }
    }

    /// Evaluate against parameter bindings. Returns `None` for an unbound
    /// symbol or on overflow.
    pub fn eval(&self, params: &BTreeMap<String, i64>) -> Option<i64> {
        match &self.sym {
            None => Some(self.offset),
            Some(name) => {
                let v = *params.get(name)?;
                self.scale.checked_mul(v)?.checked_add(self.offset)
            }
        }
    }

    /// Rendering used where the bound is an operand of `-` or `+`: anything
    /// with a leading minus sign is parenthesized.
    pub fn atom(&self) -> String {
        let s = self.to_string();
        if s.starts_with('-') {
            format!("({s})")
        } else {
            s
        }
    }

    /// Trip count expression `(upper-lower+1)`, or `(upper)` when the lower
    /// bound is the literal 1.
    pub fn length_text(lower: &BoundExpr, upper: &BoundExpr) -> String {
        if lower.as_literal() == Some(1) {
            format!("({upper})")
        } else {
            format!("({upper}-{}+1)", lower.atom())
        }
    }
}

impl fmt::Display for BoundExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let Some(name) = &self.sym else {
            return write!(f, "{}", self.offset);
        };
        match self.scale {
            1 => write!(f, "{name}")?,
            -1 => write!(f, "-{name}")?,
            k => write!(f, "{k}*{name}")?,
        }
        match self.offset {
            0 => Ok(()),
            o if o > 0 => write!(f, "+{o}"),
            o => write!(f, "{o}"),
        }
    }
}

/// Why a bound failed to parse. Column offsets are relative to the start of
/// the bound text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BoundSyntaxError {
    pub col: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Int(i64),
    Ident(String),
    Plus,
    Minus,
    Star,
    LParen,
    RParen,
}

fn lex(text: &str) -> Result<Vec<(usize, Tok)>, BoundSyntaxError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        match c {
            ' ' | '\t' => i += 1,
            '+' => {
                out.push((i, Tok::Plus));
                i += 1;
            }
            '-' => {
                out.push((i, Tok::Minus));
                i += 1;
            }
            '*' => {
                out.push((i, Tok::Star));
                i += 1;
            }
            '(' => {
                out.push((i, Tok::LParen));
                i += 1;
            }
            ')' => {
                out.push((i, Tok::RParen));
                i += 1;
            }
            '0'..='9' => {
                let start = i;
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
                let v = text[start..i]
                    .parse::<i64>()
                    .map_err(|_| BoundSyntaxError {
                        col: start,
                        message: "integer literal out of range".into(),
                    })?;
                out.push((start, Tok::Int(v)));
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let start = i;
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                out.push((start, Tok::Ident(text[start..i].to_ascii_lowercase())));
            }
            _ => {
                return Err(BoundSyntaxError {
                    col: i,
                    message: format!("unexpected character '{c}' in bound expression"),
                })
            }
        }
    }
    Ok(out)
}

/// Parse a bound expression. Anything outside the accepted forms is rejected.
pub fn parse_bound(text: &str) -> Result<BoundExpr, BoundSyntaxError> {
    let mut toks = lex(text)?;
    if toks.is_empty() {
        return Err(BoundSyntaxError {
            col: 0,
            message: "empty bound expression".into(),
        });
    }
    if toks.first().map(|t| &t.1) == Some(&Tok::LParen) {
        if toks.last().map(|t| &t.1) != Some(&Tok::RParen) {
            return Err(BoundSyntaxError {
                col: toks[0].0,
                message: "unbalanced parentheses in bound expression".into(),
            });
        }
        toks.remove(0);
        toks.pop();
    }
    let unsupported = |col: usize| {
        BoundSyntaxError {
        col,
        message: "unsupported bound expression (allowed: lit, ident, -ident, ident+lit, ident-lit, lit*ident)".into(),
    }
    };
    let toks: Vec<Tok> = {
        if let Some((col, _)) = toks
            .iter()
            .find(|(_, t)| matches!(t, Tok::LParen | Tok::RParen))
        {
            return Err(unsupported(*col));
        }
        toks.into_iter().map(|(_, t)| t).collect()
    };
    let expr = match toks.as_slice() {
        [Tok::Int(v)] => BoundExpr::literal(*v),
        [Tok::Minus, Tok::Int(v)] => BoundExpr::literal(-*v),
        [Tok::Ident(n)] => BoundExpr::symbol(n.clone()),
        [Tok::Minus, Tok::Ident(n)] => BoundExpr::negated_symbol(n.clone()),
        [Tok::Ident(n), Tok::Plus, Tok::Int(v)] => BoundExpr::shifted(n.clone(), *v),
        [Tok::Ident(n), Tok::Minus, Tok::Int(v)] => BoundExpr::shifted(n.clone(), -*v),
        [Tok::Int(k), Tok::Star, Tok::Ident(n)] => BoundExpr::scaled(*k, n.clone()),
        _ => return Err(unsupported(0)),
    };
    Ok(expr)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn accepted_forms() {
        assert_eq!(parse_bound("2*nv").unwrap(), BoundExpr::scaled(2, "nv"));
        assert_eq!(parse_bound("nz-1").unwrap(), BoundExpr::shifted("nz", -1));
        assert_eq!(
            parse_bound("(-nz)").unwrap(),
            BoundExpr::negated_symbol("nz")
        );
        assert_eq!(parse_bound("-8").unwrap(), BoundExpr::literal(-8));
        assert_eq!(
            parse_bound(" ist_xw ").unwrap(),
            BoundExpr::symbol("ist_xw")
        );
        assert_eq!(parse_bound("n+3").unwrap(), BoundExpr::shifted("n", 3));
    }

    #[test]
    fn richer_forms_rejected() {
        for bad in ["n*2", "2*n+1", "a+b", "((n))", "n-", "", "n/2", "(n"] {
            assert!(parse_bound(bad).is_err(), "{bad} should be rejected");
        }
    }

    #[test]
    fn rendering() {
        assert_eq!(BoundExpr::negated_symbol("nz").atom(), "(-nz)");
        assert_eq!(BoundExpr::shifted("nz", -1).to_string(), "nz-1");
        assert_eq!(BoundExpr::literal(0).atom(), "0");
        let len = BoundExpr::length_text(
            &BoundExpr::negated_symbol("nz"),
            &BoundExpr::shifted("nz", -1),
        );
        assert_eq!(len, "(nz-1-(-nz)+1)");
        let len = BoundExpr::length_text(&BoundExpr::literal(1), &BoundExpr::scaled(2, "nv"));
        assert_eq!(len, "(2*nv)");
        let len = BoundExpr::length_text(&BoundExpr::literal(0), &BoundExpr::symbol("nyw"));
        assert_eq!(len, "(nyw-0+1)");
    }

    #[test]
    fn evaluation() {
        let params: BTreeMap<String, i64> = [("nz".to_string(), 8)].into_iter().collect();
        assert_eq!(BoundExpr::negated_symbol("nz").eval(&params), Some(-8));
        assert_eq!(BoundExpr::shifted("nz", -1).eval(&params), Some(7));
        assert_eq!(BoundExpr::symbol("other").eval(&params), None);
    }
}
