//! Arithmetic expressions over named coordinates, evaluated on jets.
//!
//! Grammar: `+ - * /`, `^` (right associative), unary minus, parentheses,
//! numbers, the constants `pi` and `e`, and the functions `ln`, `log`,
//! `exp`, `sin`, `cos`, `arctan`, `atan` and `sqrt`.

use std::fmt;
use std::sync::Arc;

use crate::field::ScalarField;
use crate::jet::{Jet3, JetError};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{message} at offset {offset} in `{input}`")]
pub struct ExprError {
    pub message: String,
    pub offset: usize,
    pub input: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Ln,
    Exp,
    Sin,
    Cos,
    Atan,
    Sqrt,
}

impl Func {
    fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "ln" | "log" => Func::Ln,
            "exp" => Func::Exp,
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "arctan" | "atan" => Func::Atan,
            "sqrt" => Func::Sqrt,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Var(usize),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

impl Expr {
    /// Parses `src`, resolving identifiers against `variables` by position.
    pub fn parse(src: &str, variables: &[&str]) -> Result<Expr, ExprError> {
        let mut p = Parser {
            src,
            tokens: tokenize(src)?,
            pos: 0,
            variables,
        };
        let e = p.expr()?;
        match p.peek() {
            None => Ok(e),
            Some(t) => Err(p.error_at(t.offset, format!("unexpected `{}`", t.text(src)))),
        }
    }

    /// Value when the expression has no variables.
    pub fn constant_value(&self) -> Option<f64> {
        Some(match self {
            Expr::Num(v) => *v,
            Expr::Var(_) => return None,
            Expr::Neg(a) => -a.constant_value()?,
            Expr::Add(a, b) => a.constant_value()? + b.constant_value()?,
            Expr::Sub(a, b) => a.constant_value()? - b.constant_value()?,
            Expr::Mul(a, b) => a.constant_value()? * b.constant_value()?,
            Expr::Div(a, b) => a.constant_value()? / b.constant_value()?,
            Expr::Pow(a, b) => a.constant_value()?.powf(b.constant_value()?),
            Expr::Call(f, a) => {
                let v = a.constant_value()?;
                match f {
                    Func::Ln => v.ln(),
                    Func::Exp => v.exp(),
                    Func::Sin => v.sin(),
                    Func::Cos => v.cos(),
                    Func::Atan => v.atan(),
                    Func::Sqrt => v.sqrt(),
                }
            }
        })
    }

    pub fn eval(&self, vars: &[Jet3]) -> Result<Jet3, JetError> {
        let dim = vars.first().map_or(0, Jet3::dim);
        Ok(match self {
            Expr::Num(v) => Jet3::constant(*v, dim),
            Expr::Var(i) => vars[*i].clone(),
            Expr::Neg(a) => -a.eval(vars)?,
            Expr::Add(a, b) => a.eval(vars)? + b.eval(vars)?,
            Expr::Sub(a, b) => a.eval(vars)? - b.eval(vars)?,
            Expr::Mul(a, b) => match (a.constant_value(), b.constant_value()) {
                (Some(c), _) => b.eval(vars)?.scale(c),
                (_, Some(c)) => a.eval(vars)?.scale(c),
                _ => a.eval(vars)? * b.eval(vars)?,
            },
            Expr::Div(a, b) => match b.constant_value() {
                Some(c) if c != 0.0 => a.eval(vars)?.scale(1.0 / c),
                _ => a.eval(vars)?.try_div(&b.eval(vars)?)?,
            },
            Expr::Pow(a, b) => {
                let base = a.eval(vars)?;
                match b.constant_value() {
                    Some(c) if c.fract() == 0.0 && c.abs() <= i32::MAX as f64 => base.powi(c as i32)?,
                    Some(c) => base.powf(c)?,
                    None => base.pow(&b.eval(vars)?)?,
                }
            }
            Expr::Call(f, a) => {
                let x = a.eval(vars)?;
                match f {
                    Func::Ln => x.ln()?,
                    Func::Exp => x.exp(),
                    Func::Sin => x.sin(),
                    Func::Cos => x.cos(),
                    Func::Atan => x.atan(),
                    Func::Sqrt => x.sqrt()?,
                }
            }
        })
    }

    pub fn into_field(self) -> ScalarField {
        let e = Arc::new(self);
        ScalarField::new(move |x| e.eval(x))
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(v) => write!(f, "{v}"),
            Expr::Var(i) => write!(f, "#{i}"),
            Expr::Neg(a) => write!(f, "(-{a})"),
            Expr::Add(a, b) => write!(f, "({a} + {b})"),
            Expr::Sub(a, b) => write!(f, "({a} - {b})"),
            Expr::Mul(a, b) => write!(f, "({a} * {b})"),
            Expr::Div(a, b) => write!(f, "({a} / {b})"),
            Expr::Pow(a, b) => write!(f, "({a} ^ {b})"),
            Expr::Call(func, a) => write!(f, "{func:?}({a})"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Kind {
    Num(f64),
    Ident,
    Op(char),
}

#[derive(Debug, Clone, Copy)]
struct Token {
    kind: Kind,
    offset: usize,
    len: usize,
}

impl Token {
    fn text<'a>(&self, src: &'a str) -> &'a str {
        &src[self.offset..self.offset + self.len]
    }
}

fn tokenize(src: &str) -> Result<Vec<Token>, ExprError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_ascii_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                i += 1;
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
            let text = &src[start..i];
            let v: f64 = text.parse().map_err(|_| ExprError {
                message: format!("bad number `{text}`"),
                offset: start,
                input: src.to_string(),
            })?;
            out.push(Token {
                kind: Kind::Num(v),
                offset: start,
                len: i - start,
            });
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push(Token {
                kind: Kind::Ident,
                offset: start,
                len: i - start,
            });
        } else if "+-*/^()".contains(c) {
            out.push(Token {
                kind: Kind::Op(c),
                offset: i,
                len: 1,
            });
            i += 1;
        } else {
            let ch = src[i..].chars().next().unwrap_or(c);
            return Err(ExprError {
                message: format!("unexpected character `{ch}`"),
                offset: i,
                input: src.to_string(),
            });
        }
    }
    Ok(out)
}

struct Parser<'a> {
    src: &'a str,
    tokens: Vec<Token>,
    pos: usize,
    variables: &'a [&'a str],
}

impl Parser<'_> {
    fn peek(&self) -> Option<Token> {
        self.tokens.get(self.pos).copied()
    }

    fn error_at(&self, offset: usize, message: String) -> ExprError {
        ExprError {
            message,
            offset,
            input: self.src.to_string(),
        }
    }

    fn eat(&mut self, op: char) -> bool {
        if matches!(self.peek(), Some(Token { kind: Kind::Op(c), .. }) if c == op) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, op: char) -> Result<(), ExprError> {
        if self.eat(op) {
            Ok(())
        } else {
            let offset = self.peek().map_or(self.src.len(), |t| t.offset);
            Err(self.error_at(offset, format!("expected `{op}`")))
        }
    }

    fn expr(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.term()?;
        loop {
            if self.eat('+') {
                lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
            } else if self.eat('-') {
                lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.unary()?;
        loop {
            if self.eat('*') {
                lhs = Expr::Mul(Box::new(lhs), Box::new(self.unary()?));
            } else if self.eat('/') {
                lhs = Expr::Div(Box::new(lhs), Box::new(self.unary()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn unary(&mut self) -> Result<Expr, ExprError> {
        if self.eat('-') {
            Ok(Expr::Neg(Box::new(self.unary()?)))
        } else if self.eat('+') {
            self.unary()
        } else {
            self.power()
        }
    }

    fn power(&mut self) -> Result<Expr, ExprError> {
        let base = self.atom()?;
        if self.eat('^') {
            Ok(Expr::Pow(Box::new(base), Box::new(self.unary()?)))
        } else {
            Ok(base)
        }
    }

    fn atom(&mut self) -> Result<Expr, ExprError> {
        let Some(tok) = self.peek() else {
            return Err(self.error_at(self.src.len(), "unexpected end of expression".into()));
        };
        self.pos += 1;
        match tok.kind {
            Kind::Num(v) => Ok(Expr::Num(v)),
            Kind::Op('(') => {
                let e = self.expr()?;
                self.expect(')')?;
                Ok(e)
            }
            Kind::Op(c) => Err(self.error_at(tok.offset, format!("unexpected `{c}`"))),
            Kind::Ident => {
                let name = tok.text(self.src);
                if let Some(i) = self.variables.iter().position(|v| *v == name) {
                    return Ok(Expr::Var(i));
                }
                if let Some(func) = Func::from_name(name) {
                    self.expect('(')?;
                    let arg = self.expr()?;
                    self.expect(')')?;
                    return Ok(Expr::Call(func, Box::new(arg)));
                }
                match name {
                    "pi" => Ok(Expr::Num(std::f64::consts::PI)),
                    "e" => Ok(Expr::Num(std::f64::consts::E)),
                    _ => Err(self.error_at(tok.offset, format!("unknown identifier `{name}`"))),
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn eval_at(src: &str, vars: &[&str], at: &[f64]) -> Jet3 {
        Expr::parse(src, vars).unwrap().eval(&Jet3::variables(at)).unwrap()
    }

    #[test]
    fn precedence_and_associativity() {
        let v = |s| Expr::parse(s, &[]).unwrap().constant_value().unwrap();
        assert_eq!(v("1 + 2 * 3"), 7.0);
        assert_eq!(v("2 ^ 3 ^ 2"), 512.0);
        assert_eq!(v("-2 ^ 2"), -4.0);
        assert_eq!(v("(1 + 2) * 3 - 4 / 2"), 7.0);
        assert_eq!(v("1.5e2 + 2E-1"), 150.2);
        assert_eq!(v("cos(pi)"), -1.0);
    }

    #[test]
    fn derivatives_through_functions() {
        let j = eval_at("exp(2*x) * sin(y)", &["x", "y"], &[0.0, 0.5]);
        assert!((j.value() - 0.5f64.sin()).abs() < 1e-15);
        assert!((j.d1(0) - 2.0 * 0.5f64.sin()).abs() < 1e-15);
        assert!((j.d2(0, 1) - 2.0 * 0.5f64.cos()).abs() < 1e-15);
        let j = eval_at("arctan(x/y) + ln(x^2 + y^2)/2", &["x", "y"], &[1.0, 1.0]);
        assert!((j.d1(0) - 1.0).abs() < 1e-15);
        assert!(j.d1(1).abs() < 1e-15);
    }

    #[test]
    fn variable_exponent() {
        let j = eval_at("t^t", &["t"], &[2.0]);
        assert!((j.value() - 4.0).abs() < 1e-14);
        assert!((j.d1(0) - 4.0 * (2f64.ln() + 1.0)).abs() < 1e-13);
    }

    #[test]
    fn errors_point_at_the_problem() {
        let e = Expr::parse("1 + foo", &["x"]).unwrap_err();
        assert_eq!(e.offset, 4);
        assert!(Expr::parse("(1 + x", &["x"]).is_err());
        assert!(Expr::parse("1 $ 2", &[]).is_err());
        assert!(Expr::parse("x x", &["x"]).is_err());
        assert!(Expr::parse("", &[]).is_err());
    }

    #[test]
    fn domain_errors_surface_on_evaluation() {
        let e = Expr::parse("ln(x)", &["x"]).unwrap();
        assert!(e.eval(&Jet3::variables(&[-1.0])).is_err());
    }
}
