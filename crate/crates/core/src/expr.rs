//! A small arithmetic language in `x`, `y`, `z` for supplying fields on the
//! command line.
//!
//! ```text
//! expr    := expr ('+' | '-') expr | expr ('*' | '/') expr
//!          | '-' expr | expr '^' expr | atom
//! atom    := number | 'x' | 'y' | 'z' | 'pi' | '(' expr ')'
//!          | func '(' expr (',' expr)* ')'
//! func    := abs | exp | sqrt | ln | min | max
//! ```
//!
//! Precedence from tightest: `^` (right associative), unary minus, `* /`,
//! `+ -`. So `-x^2` is `-(x^2)` and `2^3^2` is `2^9`. `min` and `max` take
//! two or more arguments, the other functions exactly one. Whitespace is
//! ignored. Error positions are 0-based byte offsets.

use std::fmt;

use thiserror::Error;

use crate::fields::{EvalError, ScalarField};
use crate::geometry::Vec3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Var {
    X,
    Y,
    Z,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnaryOp {
    Neg,
    Abs,
    Exp,
    Sqrt,
    Ln,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NaryOp {
    Min,
    Max,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    Var(Var),
    Unary(UnaryOp, Box<Expr>),
    Binary(BinaryOp, Box<Expr>, Box<Expr>),
    Nary(NaryOp, Vec<Expr>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParseErrorKind {
    Lexical,
    Syntax,
    Arity,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{kind:?} error at position {position}: {message}")]
pub struct ParseError {
    pub kind: ParseErrorKind,
    pub position: usize,
    pub message: String,
}

impl ParseError {
    fn new(kind: ParseErrorKind, position: usize, message: impl Into<String>) -> Self {
        Self {
            kind,
            position,
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Num(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
    Comma,
    End,
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Token::Num(v) => write!(f, "number {v}"),
            Token::Ident(s) => write!(f, "`{s}`"),
            Token::Op(c) => write!(f, "`{c}`"),
            Token::LParen => f.write_str("`(`"),
            Token::RParen => f.write_str("`)`"),
            Token::Comma => f.write_str("`,`"),
            Token::End => f.write_str("end of input"),
        }
    }
}

fn lex(text: &str) -> Result<Vec<(Token, usize)>, ParseError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        match c {
            b' ' | b'\t' | b'\n' | b'\r' => i += 1,
            b'+' | b'-' | b'*' | b'/' | b'^' => {
                out.push((Token::Op(c as char), i));
                i += 1;
            }
            b'(' => {
                out.push((Token::LParen, i));
                i += 1;
            }
            b')' => {
                out.push((Token::RParen, i));
                i += 1;
            }
            b',' => {
                out.push((Token::Comma, i));
                i += 1;
            }
            b'0'..=b'9' | b'.' => {
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
                        while j < bytes.len() && bytes[j].is_ascii_digit() {
                            j += 1;
                        }
                        i = j;
                    }
                }
                let literal = &text[start..i];
                let value: f64 = literal.parse().map_err(|_| {
                    ParseError::new(
                        ParseErrorKind::Lexical,
                        start,
                        format!("malformed number `{literal}`"),
                    )
                })?;
                if !value.is_finite() {
                    return Err(ParseError::new(
                        ParseErrorKind::Lexical,
                        start,
                        format!("number `{literal}` is out of range"),
                    ));
                }
                out.push((Token::Num(value), start));
            }
            c if c.is_ascii_alphabetic() || c == b'_' => {
                let start = i;
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                out.push((Token::Ident(text[start..i].to_string()), start));
            }
            _ => {
                let ch = text[i..].chars().next().unwrap_or('?');
                return Err(ParseError::new(
                    ParseErrorKind::Lexical,
                    i,
                    format!("unexpected character {ch:?}"),
                ));
            }
        }
    }
    out.push((Token::End, text.len()));
    Ok(out)
}

// binding powers
const BP_ADD: u8 = 10;
const BP_MUL: u8 = 20;
const BP_NEG: u8 = 30;
const BP_POW: u8 = 40;

struct Parser {
    tokens: Vec<(Token, usize)>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &(Token, usize) {
        &self.tokens[self.pos]
    }

    fn next(&mut self) -> (Token, usize) {
        let t = self.tokens[self.pos].clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn unexpected(&self, (tok, at): &(Token, usize), wanted: &str) -> ParseError {
        ParseError::new(
            ParseErrorKind::Syntax,
            *at,
            format!("expected {wanted}, found {tok}"),
        )
    }

    fn expect(&mut self, want: Token, wanted: &str) -> Result<(), ParseError> {
        let t = self.next();
        if t.0 == want {
            Ok(())
        } else {
            Err(self.unexpected(&t, wanted))
        }
    }

    fn expression(&mut self, min_bp: u8) -> Result<Expr, ParseError> {
        let mut lhs = self.prefix()?;
        loop {
            let (op, lbp, rbp) = match self.peek().0 {
                Token::Op('+') => (BinaryOp::Add, BP_ADD, BP_ADD + 1),
                Token::Op('-') => (BinaryOp::Sub, BP_ADD, BP_ADD + 1),
                Token::Op('*') => (BinaryOp::Mul, BP_MUL, BP_MUL + 1),
                Token::Op('/') => (BinaryOp::Div, BP_MUL, BP_MUL + 1),
                // right associative; the exponent may carry its own sign
                Token::Op('^') => (BinaryOp::Pow, BP_POW, BP_NEG),
                _ => break,
            };
            if lbp < min_bp {
                break;
            }
            self.next();
            let rhs = self.expression(rbp)?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn prefix(&mut self) -> Result<Expr, ParseError> {
        let tok = self.next();
        match tok.0 {
            Token::Num(v) => Ok(Expr::Const(v)),
            Token::Op('-') => {
                let operand = self.expression(BP_NEG)?;
                Ok(Expr::Unary(UnaryOp::Neg, Box::new(operand)))
            }
            Token::LParen => {
                let inner = self.expression(0)?;
                self.expect(Token::RParen, "`)`")?;
                Ok(inner)
            }
            Token::Ident(ref name) => self.identifier(name, tok.1),
            _ => Err(self.unexpected(&tok, "a number, variable, function or `(`")),
        }
    }

    fn identifier(&mut self, name: &str, at: usize) -> Result<Expr, ParseError> {
        match name {
            "x" => return Ok(Expr::Var(Var::X)),
            "y" => return Ok(Expr::Var(Var::Y)),
            "z" => return Ok(Expr::Var(Var::Z)),
            "pi" => return Ok(Expr::Const(std::f64::consts::PI)),
            _ => {}
        }
        enum Kind {
            Unary(UnaryOp),
            Nary(NaryOp),
        }
        let kind = match name {
            "abs" => Kind::Unary(UnaryOp::Abs),
            "exp" => Kind::Unary(UnaryOp::Exp),
            "sqrt" => Kind::Unary(UnaryOp::Sqrt),
            "ln" => Kind::Unary(UnaryOp::Ln),
            "min" => Kind::Nary(NaryOp::Min),
            "max" => Kind::Nary(NaryOp::Max),
            _ => {
                return Err(ParseError::new(
                    ParseErrorKind::Syntax,
                    at,
                    format!("unknown identifier `{name}`"),
                ))
            }
        };
        self.expect(Token::LParen, &format!("`(` after `{name}`"))?;
        let mut args = vec![self.expression(0)?];
        loop {
            let t = self.next();
            match t.0 {
                Token::Comma => args.push(self.expression(0)?),
                Token::RParen => break,
                _ => return Err(self.unexpected(&t, "`,` or `)`")),
            }
        }
        match kind {
            Kind::Unary(op) => {
                if args.len() != 1 {
                    return Err(ParseError::new(
                        ParseErrorKind::Arity,
                        at,
                        format!("`{name}` takes 1 argument, got {}", args.len()),
                    ));
                }
                Ok(Expr::Unary(op, Box::new(args.remove(0))))
            }
            Kind::Nary(op) => {
                if args.len() < 2 {
                    return Err(ParseError::new(
                        ParseErrorKind::Arity,
                        at,
                        format!("`{name}` takes at least 2 arguments, got {}", args.len()),
                    ));
                }
                Ok(Expr::Nary(op, args))
            }
        }
    }
}

/// Parses `text` into an expression tree.
pub fn parse(text: &str) -> Result<Expr, ParseError> {
    let tokens = lex(text)?;
    if tokens.len() == 1 {
        return Err(ParseError::new(ParseErrorKind::Syntax, 0, "empty expression"));
    }
    let mut parser = Parser { tokens, pos: 0 };
    let expr = parser.expression(0)?;
    let rest = parser.peek().clone();
    if rest.0 != Token::End {
        return Err(parser.unexpected(&rest, "an operator or end of input"));
    }
    Ok(expr)
}

impl fmt::Display for Expr {
    /// Fully parenthesized; parses back to the same tree.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            // `{}` on f64 is the shortest representation that round-trips
            Expr::Const(v) => write!(f, "{v}"),
            Expr::Var(Var::X) => f.write_str("x"),
            Expr::Var(Var::Y) => f.write_str("y"),
            Expr::Var(Var::Z) => f.write_str("z"),
            Expr::Unary(UnaryOp::Neg, a) => write!(f, "(-{a})"),
            Expr::Unary(op, a) => {
                let name = match op {
                    UnaryOp::Abs => "abs",
                    UnaryOp::Exp => "exp",
                    UnaryOp::Sqrt => "sqrt",
                    UnaryOp::Ln => "ln",
                    UnaryOp::Neg => unreachable!(),
                };
                write!(f, "{name}({a})")
            }
            Expr::Binary(op, a, b) => {
                let sym = match op {
                    BinaryOp::Add => '+',
                    BinaryOp::Sub => '-',
                    BinaryOp::Mul => '*',
                    BinaryOp::Div => '/',
                    BinaryOp::Pow => '^',
                };
                write!(f, "({a} {sym} {b})")
            }
            Expr::Nary(op, args) => {
                f.write_str(match op {
                    NaryOp::Min => "min(",
                    NaryOp::Max => "max(",
                })?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{a}")?;
                }
                f.write_str(")")
            }
        }
    }
}

fn power(base: f64, exponent: f64) -> Option<f64> {
    if exponent.fract() == 0.0 && exponent.abs() <= i32::MAX as f64 {
        if base == 0.0 && exponent < 0.0 {
            return None;
        }
        return Some(base.powi(exponent as i32));
    }
    if base < 0.0 {
        return None;
    }
    Some(base.powf(exponent))
}

impl Expr {
    /// Evaluates at `p`. Domain violations and non-finite results are errors.
    pub fn eval(&self, p: Vec3) -> Result<f64, EvalError> {
        let fail = |msg: String| Err(EvalError::new(p, msg));
        let v = match self {
            Expr::Const(v) => *v,
            Expr::Var(Var::X) => p[0],
            Expr::Var(Var::Y) => p[1],
            Expr::Var(Var::Z) => p[2],
            Expr::Unary(op, a) => {
                let a = a.eval(p)?;
                match op {
                    UnaryOp::Neg => -a,
                    UnaryOp::Abs => a.abs(),
                    UnaryOp::Exp => a.exp(),
                    UnaryOp::Sqrt if a < 0.0 => return fail(format!("sqrt of negative value {a}")),
                    UnaryOp::Sqrt => a.sqrt(),
                    UnaryOp::Ln if a <= 0.0 => return fail(format!("ln of non-positive value {a}")),
                    UnaryOp::Ln => a.ln(),
                }
            }
            Expr::Binary(op, a, b) => {
                let (a, b) = (a.eval(p)?, b.eval(p)?);
                match op {
                    BinaryOp::Add => a + b,
                    BinaryOp::Sub => a - b,
                    BinaryOp::Mul => a * b,
                    BinaryOp::Div if b == 0.0 => return fail("division by zero".into()),
                    BinaryOp::Div => a / b,
                    BinaryOp::Pow => match power(a, b) {
                        Some(v) => v,
                        None => return fail(format!("{a}^{b} is undefined")),
                    },
                }
            }
            Expr::Nary(op, args) => {
                let mut acc = match op {
                    NaryOp::Min => f64::INFINITY,
                    NaryOp::Max => f64::NEG_INFINITY,
                };
                for a in args {
                    let v = a.eval(p)?;
                    acc = match op {
                        NaryOp::Min => acc.min(v),
                        NaryOp::Max => acc.max(v),
                    };
                }
                acc
            }
        };
        if v.is_finite() {
            Ok(v)
        } else {
            fail(format!("result {v} is not finite"))
        }
    }
}

/// A parsed expression used as a field. It has no analytic gradient, so
/// radial derivatives fall back to finite differences.
#[derive(Debug, Clone, PartialEq)]
pub struct ExprField {
    pub source: String,
    pub ast: Expr,
}

impl ExprField {
    pub fn parse(source: &str) -> Result<Self, ParseError> {
        Ok(Self {
            source: source.to_string(),
            ast: parse(source)?,
        })
    }
}

/// Wraps an already parsed tree.
pub fn to_field(ast: Expr) -> ExprField {
    ExprField {
        source: ast.to_string(),
        ast,
    }
}

impl ScalarField for ExprField {
    fn name(&self) -> String {
        self.source.clone()
    }

    fn eval(&self, p: Vec3) -> Result<f64, EvalError> {
        self.ast.eval(p)
    }
}
