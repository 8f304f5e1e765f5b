//! Recursive descent parser for rational function expressions.
//!
//! Grammar (whitespace insensitive):
//!
//! ```text
//! expr   := term (('+'|'-') term)*
//! term   := factor (('*'|'/') factor)*
//! factor := base ('^' int)?
//! base   := int | var | '(' expr ')'
//! ```
//!
//! Variables are resolved against the ground context at parse time, so an
//! unknown name is reported with its offset.

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RFExpr {
    Lit(u64),
    Var(usize),
    Add(Box<RFExpr>, Box<RFExpr>),
    Sub(Box<RFExpr>, Box<RFExpr>),
    Mul(Box<RFExpr>, Box<RFExpr>),
    Div(Box<RFExpr>, Box<RFExpr>),
    Pow(Box<RFExpr>, u32),
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Int(u64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
}

fn lex(text: &str) -> Result<Vec<(Tok, usize)>> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0usize;
    while i < bytes.len() {
        let b = bytes[i];
        match b {
            b' ' | b'\t' | b'\n' | b'\r' => i += 1,
            b'+' => {
                out.push((Tok::Plus, i));
                i += 1;
            }
            b'-' => {
                out.push((Tok::Minus, i));
                i += 1;
            }
            b'*' => {
                out.push((Tok::Star, i));
                i += 1;
            }
            b'/' => {
                out.push((Tok::Slash, i));
                i += 1;
            }
            b'^' => {
                out.push((Tok::Caret, i));
                i += 1;
            }
            b'(' => {
                out.push((Tok::LParen, i));
                i += 1;
            }
            b')' => {
                out.push((Tok::RParen, i));
                i += 1;
            }
            b'0'..=b'9' => {
                let start = i;
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
                let lit: u64 = text[start..i].parse().map_err(|_| Error::Syntax {
                    offset: start,
                    message: "integer literal too large".into(),
                })?;
                out.push((Tok::Int(lit), start));
            }
            b'a'..=b'z' | b'A'..=b'Z' | b'_' => {
                let start = i;
                while i < bytes.len()
                    && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_')
                {
                    i += 1;
                }
                out.push((Tok::Ident(text[start..i].to_string()), start));
            }
            _ => {
                return Err(Error::Syntax {
                    offset: i,
                    message: format!("unexpected character `{}`", b as char),
                })
            }
        }
    }
    Ok(out)
}

struct Parser<'a> {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    vars: &'a [String],
    end: usize,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&(Tok, usize)> {
        self.toks.get(self.pos)
    }

    fn here(&self) -> usize {
        self.peek().map(|(_, o)| *o).unwrap_or(self.end)
    }

    fn bump(&mut self) -> Option<(Tok, usize)> {
        let t = self.toks.get(self.pos).cloned();
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn expr(&mut self) -> Result<RFExpr> {
        let mut acc = self.term()?;
        loop {
            match self.peek() {
                Some((Tok::Plus, _)) => {
                    self.bump();
                    acc = RFExpr::Add(Box::new(acc), Box::new(self.term()?));
                }
                Some((Tok::Minus, _)) => {
                    self.bump();
                    acc = RFExpr::Sub(Box::new(acc), Box::new(self.term()?));
                }
                _ => return Ok(acc),
            }
        }
    }

    fn term(&mut self) -> Result<RFExpr> {
        let mut acc = self.factor()?;
        loop {
            match self.peek() {
                Some((Tok::Star, _)) => {
                    self.bump();
                    acc = RFExpr::Mul(Box::new(acc), Box::new(self.factor()?));
                }
                Some((Tok::Slash, _)) => {
                    self.bump();
                    acc = RFExpr::Div(Box::new(acc), Box::new(self.factor()?));
                }
                _ => return Ok(acc),
            }
        }
    }

    fn factor(&mut self) -> Result<RFExpr> {
        let base = self.base()?;
        if let Some((Tok::Caret, _)) = self.peek() {
            self.bump();
            let off = self.here();
            match self.bump() {
                Some((Tok::Int(n), _)) => {
                    let n: u32 = n.try_into().map_err(|_| Error::Syntax {
                        offset: off,
                        message: "exponent too large".into(),
                    })?;
                    return Ok(RFExpr::Pow(Box::new(base), n));
                }
                _ => {
                    return Err(Error::Syntax {
                        offset: off,
                        message: "expected integer exponent after `^`".into(),
                    })
                }
            }
        }
        Ok(base)
    }

    fn base(&mut self) -> Result<RFExpr> {
        let off = self.here();
        match self.bump() {
            Some((Tok::Int(n), _)) => Ok(RFExpr::Lit(n)),
            Some((Tok::Ident(name), o)) => {
                match self.vars.iter().position(|v| *v == name) {
                    Some(j) => Ok(RFExpr::Var(j)),
                    None => Err(Error::UnknownVariable { name, offset: o }),
                }
            }
            Some((Tok::LParen, _)) => {
                let inner = self.expr()?;
                match self.bump() {
                    Some((Tok::RParen, _)) => Ok(inner),
                    other => Err(Error::Syntax {
                        offset: other.map(|(_, o)| o).unwrap_or(self.end),
                        message: "expected closing `)`".into(),
                    }),
                }
            }
            Some((_, o)) => Err(Error::Syntax {
                offset: o,
                message: "expected operand".into(),
            }),
            None => Err(Error::Syntax {
                offset: off,
                message: "expected operand".into(),
            }),
        }
    }
}

/// Parse `text` against the given variable names.
pub fn parse_rf(text: &str, vars: &[String]) -> Result<RFExpr> {
    let toks = lex(text)?;
    let mut p = Parser { toks, pos: 0, vars, end: text.len() };
    let e = p.expr()?;
    if let Some((_, o)) = p.peek() {
        return Err(Error::Syntax {
            offset: *o,
            message: "trailing input after expression".into(),
        });
    }
    Ok(e)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vars() -> Vec<String> {
        vec!["y".to_string(), "x".to_string()]
    }

    #[test]
    fn parses_polynomials() {
        let e = parse_rf("y^2*(x+2)", &vars()).unwrap();
        assert_eq!(
            e,
            RFExpr::Mul(
                Box::new(RFExpr::Pow(Box::new(RFExpr::Var(0)), 2)),
                Box::new(RFExpr::Add(
                    Box::new(RFExpr::Var(1)),
                    Box::new(RFExpr::Lit(2))
                ))
            )
        );
    }

    #[test]
    fn precedence_and_associativity() {
        // 1 - x - x: left associative subtraction
        let e = parse_rf("1-x-x", &vars()).unwrap();
        assert_eq!(
            e,
            RFExpr::Sub(
                Box::new(RFExpr::Sub(
                    Box::new(RFExpr::Lit(1)),
                    Box::new(RFExpr::Var(1))
                )),
                Box::new(RFExpr::Var(1))
            )
        );
        // product binds tighter than sum
        let e2 = parse_rf("1+2*x", &vars()).unwrap();
        assert!(matches!(e2, RFExpr::Add(_, _)));
    }

    #[test]
    fn error_offsets() {
        match parse_rf("x+", &vars()) {
            Err(Error::Syntax { offset, .. }) => assert_eq!(offset, 2),
            other => panic!("expected syntax error, got {other:?}"),
        }
        match parse_rf("x+z", &vars()) {
            Err(Error::UnknownVariable { name, offset }) => {
                assert_eq!(name, "z");
                assert_eq!(offset, 2);
            }
            other => panic!("expected unknown variable, got {other:?}"),
        }
        match parse_rf("x^y", &vars()) {
            Err(Error::Syntax { offset, .. }) => assert_eq!(offset, 2),
            other => panic!("expected syntax error, got {other:?}"),
        }
        match parse_rf("(x+1", &vars()) {
            Err(Error::Syntax { offset, .. }) => assert_eq!(offset, 4),
            other => panic!("expected syntax error, got {other:?}"),
        }
        assert!(parse_rf("x$", &vars()).is_err());
    }
}
