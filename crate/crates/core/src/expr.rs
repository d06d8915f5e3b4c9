//! Arithmetic expressions in `x` and `eps` for user-defined coefficients.
//!
//! Grammar, loosest binding first:
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := unary (('*' | '/') unary)*
//! unary   := '-' unary | power
//! power   := primary ('^' unary)?
//! primary := number | 'x' | 'eps' | func '(' expr ')' | '(' expr ')'
//! func    := exp | ln | sin | cos
//! ```
//!
//! `^` is right-associative and binds tighter than unary minus, so `-x^2`
//! is `-(x^2)` and `2^-3` is `2^(-3)`.

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::dgspace::ScalarFn;
use crate::mesh::Coord;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExprError {
    #[error("syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unknown identifier '{name}' at byte {offset}")]
    UnknownIdentifier { name: String, offset: usize },
    #[error("division by zero")]
    DivisionByZero,
    #[error("{func} undefined at {arg}")]
    Domain { func: &'static str, arg: f64 },
    #[error("result is not finite")]
    NotFinite,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinOp {
    fn symbol(self) -> char {
        match self {
            BinOp::Add => '+',
            BinOp::Sub => '-',
            BinOp::Mul => '*',
            BinOp::Div => '/',
            BinOp::Pow => '^',
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Exp,
    Ln,
    Sin,
    Cos,
}

impl Func {
    fn name(self) -> &'static str {
        match self {
            Func::Exp => "exp",
            Func::Ln => "ln",
            Func::Sin => "sin",
            Func::Cos => "cos",
        }
    }

    fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "exp" => Func::Exp,
            "ln" => Func::Ln,
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ExprAst {
    Num(f64),
    X,
    Eps,
    Neg(Box<ExprAst>),
    Binary(BinOp, Box<ExprAst>, Box<ExprAst>),
    Call(Func, Box<ExprAst>),
}

/// Prints fully parenthesized, so that parsing the output gives back the same tree.
impl fmt::Display for ExprAst {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExprAst::Num(v) => write!(f, "{v:?}"),
            ExprAst::X => f.write_str("x"),
            ExprAst::Eps => f.write_str("eps"),
            ExprAst::Neg(a) => write!(f, "(-{a})"),
            ExprAst::Binary(op, a, b) => write!(f, "({a} {} {b})", op.symbol()),
            ExprAst::Call(func, a) => write!(f, "{}({a})", func.name()),
        }
    }
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl<'a> Parser<'a> {
    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn error<T>(&self, message: impl Into<String>) -> Result<T, ExprError> {
        Err(ExprError::Syntax { offset: self.pos, message: message.into() })
    }

    fn expect(&mut self, c: u8) -> Result<(), ExprError> {
        if self.peek() == Some(c) {
            self.pos += 1;
            Ok(())
        } else {
            self.error(format!("expected '{}'", c as char))
        }
    }

    fn expr(&mut self) -> Result<ExprAst, ExprError> {
        let mut lhs = self.term()?;
        while let Some(c @ (b'+' | b'-')) = self.peek() {
            self.pos += 1;
            let op = if c == b'+' { BinOp::Add } else { BinOp::Sub };
            lhs = ExprAst::Binary(op, Box::new(lhs), Box::new(self.term()?));
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<ExprAst, ExprError> {
        let mut lhs = self.unary()?;
        while let Some(c @ (b'*' | b'/')) = self.peek() {
            self.pos += 1;
            let op = if c == b'*' { BinOp::Mul } else { BinOp::Div };
            lhs = ExprAst::Binary(op, Box::new(lhs), Box::new(self.unary()?));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<ExprAst, ExprError> {
        if self.peek() == Some(b'-') {
            self.pos += 1;
            return Ok(ExprAst::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<ExprAst, ExprError> {
        let base = self.primary()?;
        if self.peek() == Some(b'^') {
            self.pos += 1;
            let exponent = self.unary()?;
            return Ok(ExprAst::Binary(BinOp::Pow, Box::new(base), Box::new(exponent)));
        }
        Ok(base)
    }

    fn primary(&mut self) -> Result<ExprAst, ExprError> {
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let inner = self.expr()?;
                self.expect(b')')?;
                Ok(inner)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() => self.identifier(),
            Some(c) => self.error(format!("unexpected '{}'", c as char)),
            None => self.error("unexpected end of input"),
        }
    }

    fn number(&mut self) -> Result<ExprAst, ExprError> {
        let start = self.pos;
        let digits = |p: &mut Self| {
            while p.pos < p.src.len() && p.src[p.pos].is_ascii_digit() {
                p.pos += 1;
            }
        };
        digits(self);
        if self.src.get(self.pos) == Some(&b'.') {
            self.pos += 1;
            digits(self);
        }
        if matches!(self.src.get(self.pos), Some(b'e' | b'E')) {
            let mark = self.pos;
            self.pos += 1;
            if matches!(self.src.get(self.pos), Some(b'+' | b'-')) {
                self.pos += 1;
            }
            if self.src.get(self.pos).is_some_and(u8::is_ascii_digit) {
                digits(self);
            } else {
                self.pos = mark;
            }
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii slice");
        match text.parse::<f64>() {
            Ok(v) => Ok(ExprAst::Num(v)),
            Err(_) => Err(ExprError::Syntax { offset: start, message: format!("bad number '{text}'") }),
        }
    }

    fn identifier(&mut self) -> Result<ExprAst, ExprError> {
        let start = self.pos;
        while self.pos < self.src.len() && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'_') {
            self.pos += 1;
        }
        let name = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii slice");
        match name {
            "x" => Ok(ExprAst::X),
            "eps" => Ok(ExprAst::Eps),
            _ => match Func::from_name(name) {
                Some(func) => {
                    self.expect(b'(')?;
                    let arg = self.expr()?;
                    self.expect(b')')?;
                    Ok(ExprAst::Call(func, Box::new(arg)))
                }
                None => Err(ExprError::UnknownIdentifier { name: name.to_string(), offset: start }),
            },
        }
    }
}

/// Parses `text`; errors carry the byte offset of the offending token.
pub fn parse_expr(text: &str) -> Result<ExprAst, ExprError> {
    let mut p = Parser { src: text.as_bytes(), pos: 0 };
    if p.peek().is_none() {
        return p.error("empty expression");
    }
    let ast = p.expr()?;
    if p.peek().is_some() {
        return p.error("unexpected trailing input");
    }
    Ok(ast)
}

/// Evaluates `ast` at `x` with the given `eps`.
pub fn eval_expr(ast: &ExprAst, x: f64, eps: f64) -> Result<f64, ExprError> {
    let v = match ast {
        ExprAst::Num(v) => *v,
        ExprAst::X => x,
        ExprAst::Eps => eps,
        ExprAst::Neg(a) => -eval_expr(a, x, eps)?,
        ExprAst::Binary(op, a, b) => {
            let (a, b) = (eval_expr(a, x, eps)?, eval_expr(b, x, eps)?);
            match op {
                BinOp::Add => a + b,
                BinOp::Sub => a - b,
                BinOp::Mul => a * b,
                BinOp::Div if b == 0.0 => return Err(ExprError::DivisionByZero),
                BinOp::Div => a / b,
                BinOp::Pow => {
                    let r = a.powf(b);
                    if r.is_nan() {
                        return Err(ExprError::Domain { func: "^", arg: a });
                    }
                    r
                }
            }
        }
        ExprAst::Call(func, a) => {
            let a = eval_expr(a, x, eps)?;
            match func {
                Func::Exp => a.exp(),
                Func::Ln if a <= 0.0 => return Err(ExprError::Domain { func: "ln", arg: a }),
                Func::Ln => a.ln(),
                Func::Sin => a.sin(),
                Func::Cos => a.cos(),
            }
        }
    };
    if v.is_finite() {
        Ok(v)
    } else {
        Err(ExprError::NotFinite)
    }
}

impl ExprAst {
    pub fn depends_on_x(&self) -> bool {
        match self {
            ExprAst::X => true,
            ExprAst::Num(_) | ExprAst::Eps => false,
            ExprAst::Neg(a) | ExprAst::Call(_, a) => a.depends_on_x(),
            ExprAst::Binary(_, a, b) => a.depends_on_x() || b.depends_on_x(),
        }
    }

    /// Symbolic `d/dx`, with constant folding of zeros and ones.
    pub fn derivative(&self) -> ExprAst {
        use ExprAst::*;
        match self {
            Num(_) | Eps => Num(0.0),
            X => Num(1.0),
            Neg(a) => neg(a.derivative()),
            Binary(BinOp::Add, a, b) => add(a.derivative(), b.derivative()),
            Binary(BinOp::Sub, a, b) => sub(a.derivative(), b.derivative()),
            Binary(BinOp::Mul, a, b) => add(mul(a.derivative(), (**b).clone()), mul((**a).clone(), b.derivative())),
            Binary(BinOp::Div, a, b) => div(
                sub(mul(a.derivative(), (**b).clone()), mul((**a).clone(), b.derivative())),
                pow((**b).clone(), Num(2.0)),
            ),
            Binary(BinOp::Pow, a, b) if !b.depends_on_x() => {
                mul(mul((**b).clone(), pow((**a).clone(), sub((**b).clone(), Num(1.0)))), a.derivative())
            }
            // d(a^b) = a^b (b' ln a + b a'/a)
            Binary(BinOp::Pow, a, b) => mul(
                self.clone(),
                add(
                    mul(b.derivative(), Call(Func::Ln, a.clone())),
                    div(mul((**b).clone(), a.derivative()), (**a).clone()),
                ),
            ),
            Call(func, a) => {
                let outer = match func {
                    Func::Exp => self.clone(),
                    Func::Ln => div(Num(1.0), (**a).clone()),
                    Func::Sin => Call(Func::Cos, a.clone()),
                    Func::Cos => neg(Call(Func::Sin, a.clone())),
                };
                mul(outer, a.derivative())
            }
        }
    }

    /// A coefficient function of position for fixed `eps`; evaluation
    /// errors become NaN and are caught by problem validation.
    pub fn to_scalar_fn(&self, eps: f64) -> ScalarFn {
        let ast = self.clone();
        Arc::new(move |p: Coord| eval_expr(&ast, p.x, eps).unwrap_or(f64::NAN))
    }
}

fn is_num(e: &ExprAst, v: f64) -> bool {
    matches!(e, ExprAst::Num(n) if *n == v)
}

fn neg(a: ExprAst) -> ExprAst {
    if is_num(&a, 0.0) {
        a
    } else {
        ExprAst::Neg(Box::new(a))
    }
}

fn add(a: ExprAst, b: ExprAst) -> ExprAst {
    if is_num(&a, 0.0) {
        b
    } else if is_num(&b, 0.0) {
        a
    } else {
        ExprAst::Binary(BinOp::Add, Box::new(a), Box::new(b))
    }
}

fn sub(a: ExprAst, b: ExprAst) -> ExprAst {
    if is_num(&b, 0.0) {
        a
    } else if is_num(&a, 0.0) {
        neg(b)
    } else {
        ExprAst::Binary(BinOp::Sub, Box::new(a), Box::new(b))
    }
}

fn mul(a: ExprAst, b: ExprAst) -> ExprAst {
    if is_num(&a, 0.0) || is_num(&b, 0.0) {
        ExprAst::Num(0.0)
    } else if is_num(&a, 1.0) {
        b
    } else if is_num(&b, 1.0) {
        a
    } else {
        ExprAst::Binary(BinOp::Mul, Box::new(a), Box::new(b))
    }
}

fn div(a: ExprAst, b: ExprAst) -> ExprAst {
    if is_num(&a, 0.0) {
        ExprAst::Num(0.0)
    } else if is_num(&b, 1.0) {
        a
    } else {
        ExprAst::Binary(BinOp::Div, Box::new(a), Box::new(b))
    }
}

fn pow(a: ExprAst, b: ExprAst) -> ExprAst {
    if is_num(&b, 1.0) {
        a
    } else {
        ExprAst::Binary(BinOp::Pow, Box::new(a), Box::new(b))
    }
}
