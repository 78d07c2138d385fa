//! Scalar expressions over the coordinates `x`, `y`, `z`.
//!
//! Field components are written in a small arithmetic language (see
//! [`Expression::parse`]) and evaluated either as plain values or as
//! value/gradient pairs propagated forward through the tree. Derivatives are
//! therefore exact up to rounding; no symbolic rewriting happens.
//!
//! ```text
//! expr   := term (("+"|"-") term)*
//! term   := factor (("*"|"/") factor)*
//! factor := ("-")? atom ("^" int)?
//! atom   := number | ident | func "(" args ")" | "(" expr ")"
//! func   := sin | cos | sqrt | abs | sgn | cheb      (cheb takes (int, expr))
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use thiserror::Error;
use twofloat::TwoFloat;

/// Named parameter bindings.
pub type Params = BTreeMap<String, f64>;

/// Arguments of `cheb` may overshoot [-1, 1] by this much before it is a
/// domain error (roundoff in arguments like `x/sqrt(x^2+y^2)`).
pub const CHEB_DOMAIN_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExprError {
    #[error("syntax error at offset {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unknown function `{name}` at offset {offset}")]
    UnknownFunction { offset: usize, name: String },
    #[error("{what} must be a literal integer (offset {offset})")]
    NonLiteral { offset: usize, what: &'static str },
    #[error("unbound parameter `{0}`")]
    UnboundParameter(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("division by zero")]
    DivisionByZero,
    #[error("not differentiable: {0}")]
    NonDifferentiable(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Var {
    X,
    Y,
    Z,
}

impl Var {
    fn index(self) -> usize {
        match self {
            Var::X => 0,
            Var::Y => 1,
            Var::Z => 2,
        }
    }

    fn name(self) -> &'static str {
        match self {
            Var::X => "x",
            Var::Y => "y",
            Var::Z => "z",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnaryOp {
    Neg,
    Sin,
    Cos,
    Sqrt,
    Abs,
    Sgn,
}

impl UnaryOp {
    fn from_name(name: &str) -> Option<Self> {
        match name {
            "sin" => Some(UnaryOp::Sin),
            "cos" => Some(UnaryOp::Cos),
            "sqrt" => Some(UnaryOp::Sqrt),
            "abs" => Some(UnaryOp::Abs),
            "sgn" => Some(UnaryOp::Sgn),
            _ => None,
        }
    }

    fn name(self) -> &'static str {
        match self {
            UnaryOp::Neg => "-",
            UnaryOp::Sin => "sin",
            UnaryOp::Cos => "cos",
            UnaryOp::Sqrt => "sqrt",
            UnaryOp::Abs => "abs",
            UnaryOp::Sgn => "sgn",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
}

impl BinaryOp {
    fn symbol(self) -> &'static str {
        match self {
            BinaryOp::Add => "+",
            BinaryOp::Sub => "-",
            BinaryOp::Mul => "*",
            BinaryOp::Div => "/",
        }
    }
}

/// Arithmetic syntax tree.
///
/// Powers carry a literal integer exponent and Chebyshev polynomials a literal
/// order, so every well-formed tree is smooth away from the explicit
/// singularities of `/`, `sqrt`, `abs` and `sgn`.
#[derive(Debug, Clone, PartialEq)]
pub enum Expression {
    Const(f64),
    Var(Var),
    Param(String),
    Unary(UnaryOp, Box<Expression>),
    Binary(BinaryOp, Box<Expression>, Box<Expression>),
    Pow(Box<Expression>, i32),
    Cheb(u32, Box<Expression>),
}

/// Where an expression is evaluated.
#[derive(Debug, Clone, Copy)]
pub struct EvalPoint<'a> {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub params: &'a Params,
}

impl<'a> EvalPoint<'a> {
    pub fn new(r: [f64; 3], params: &'a Params) -> Self {
        EvalPoint {
            x: r[0],
            y: r[1],
            z: r[2],
            params,
        }
    }

    fn coord(&self, v: Var) -> f64 {
        match v {
            Var::X => self.x,
            Var::Y => self.y,
            Var::Z => self.z,
        }
    }

    fn check_finite(&self) -> Result<(), ExprError> {
        if self.x.is_finite() && self.y.is_finite() && self.z.is_finite() {
            Ok(())
        } else {
            Err(ExprError::Domain(format!(
                "non-finite coordinates ({}, {}, {})",
                self.x, self.y, self.z
            )))
        }
    }
}

/// `cos(n arccos q)` for `|q| <= 1 + CHEB_DOMAIN_TOL`.
pub fn chebyshev(n: u32, q: f64) -> Result<f64, ExprError> {
    let q = cheb_clamp(q)?;
    Ok((f64::from(n) * q.acos()).cos())
}

/// `C_n'(q) = n U_{n-1}(q)`. Same function as `n sin(n arccos q)/sqrt(1-q^2)`
/// but finite at the endpoints, where that quotient is 0/0.
pub fn chebyshev_slope(n: u32, q: f64) -> Result<f64, ExprError> {
    Ok(cheb_slope_real(n, cheb_clamp(q)?))
}

fn cheb_clamp(q: f64) -> Result<f64, ExprError> {
    if !(q.abs() <= 1.0 + CHEB_DOMAIN_TOL) {
        return Err(ExprError::Domain(format!(
            "cheb argument {q} outside [-1, 1]"
        )));
    }
    Ok(q.clamp(-1.0, 1.0))
}

// ---------------------------------------------------------------------------
// Evaluation

/// Real number type of an evaluation: `f64`, or double-double where the
/// field needs more than 16 digits (see [`Expression::value_and_gradient_dd`]).
pub(crate) trait Real:
    Copy
    + PartialOrd
    + std::ops::Add<Output = Self>
    + std::ops::Sub<Output = Self>
    + std::ops::Mul<Output = Self>
    + std::ops::Div<Output = Self>
    + std::ops::Neg<Output = Self>
{
    fn from_f64(v: f64) -> Self;
    fn to_f64(self) -> f64;
    fn sin(self) -> Self;
    fn cos(self) -> Self;
    fn sqrt(self) -> Self;
    fn powi(self, k: i32) -> Self;
    fn cheb(n: u32, q: Self) -> Self;
}

impl Real for f64 {
    fn from_f64(v: f64) -> Self {
        v
    }
    fn to_f64(self) -> f64 {
        self
    }
    fn sin(self) -> Self {
        f64::sin(self)
    }
    fn cos(self) -> Self {
        f64::cos(self)
    }
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    fn powi(self, k: i32) -> Self {
        f64::powi(self, k)
    }
    fn cheb(n: u32, q: Self) -> Self {
        (f64::from(n) * q.acos()).cos()
    }
}

impl Real for TwoFloat {
    fn from_f64(v: f64) -> Self {
        TwoFloat::from(v)
    }
    fn to_f64(self) -> f64 {
        self.hi() + self.lo()
    }
    fn sin(self) -> Self {
        TwoFloat::sin(self)
    }
    fn cos(self) -> Self {
        TwoFloat::cos(self)
    }
    fn sqrt(self) -> Self {
        TwoFloat::sqrt(self)
    }
    fn powi(self, k: i32) -> Self {
        TwoFloat::powi(self, k)
    }
    /// Three-term recurrence; the polynomial is stable on [-1, 1].
    fn cheb(n: u32, q: Self) -> Self {
        let one = TwoFloat::from(1.0);
        if n == 0 {
            return one;
        }
        let (mut prev, mut cur) = (one, q);
        for _ in 1..n {
            let next = q * cur * 2.0 - prev;
            prev = cur;
            cur = next;
        }
        cur
    }
}

/// `C_n'(q) = n U_{n-1}(q)` by recurrence.
fn cheb_slope_real<R: Real>(n: u32, q: R) -> R {
    if n == 0 {
        return R::from_f64(0.0);
    }
    let two = R::from_f64(2.0);
    let (mut prev, mut cur) = (R::from_f64(1.0), two * q);
    if n == 1 {
        return R::from_f64(1.0);
    }
    for _ in 2..n {
        let next = two * q * cur - prev;
        prev = cur;
        cur = next;
    }
    R::from_f64(f64::from(n)) * cur
}

/// Number type threaded through the tree walk: a plain real for values, or a
/// value with a three-slot tangent for forward-mode derivatives.
trait Scalar: Copy {
    type R: Real;
    const TRACKS_DERIVATIVE: bool;
    fn constant(c: Self::R) -> Self;
    fn seeded(v: Self::R, slot: Option<usize>) -> Self;
    fn value(self) -> Self::R;
    /// `f(self)` with `f'(self)` supplied by the caller.
    fn chain(self, f: Self::R, df: Self::R) -> Self;
    fn add(self, o: Self) -> Self;
    fn sub(self, o: Self) -> Self;
    fn mul(self, o: Self) -> Self;
    fn div(self, o: Self) -> Self;
}

impl Scalar for f64 {
    type R = f64;
    const TRACKS_DERIVATIVE: bool = false;
    fn constant(c: f64) -> Self {
        c
    }
    fn seeded(v: f64, _: Option<usize>) -> Self {
        v
    }
    fn value(self) -> f64 {
        self
    }
    fn chain(self, f: f64, _: f64) -> Self {
        f
    }
    fn add(self, o: Self) -> Self {
        self + o
    }
    fn sub(self, o: Self) -> Self {
        self - o
    }
    fn mul(self, o: Self) -> Self {
        self * o
    }
    fn div(self, o: Self) -> Self {
        self / o
    }
}

#[derive(Debug, Clone, Copy)]
struct Dual<R> {
    v: R,
    d: [R; 3],
}

impl<R: Real> Dual<R> {
    fn map(self, v: R, k: R) -> Self {
        Dual {
            v,
            d: [k * self.d[0], k * self.d[1], k * self.d[2]],
        }
    }
}

impl<R: Real> Scalar for Dual<R> {
    type R = R;
    const TRACKS_DERIVATIVE: bool = true;
    fn constant(c: R) -> Self {
        Dual {
            v: c,
            d: [R::from_f64(0.0); 3],
        }
    }
    fn seeded(v: R, slot: Option<usize>) -> Self {
        let mut d = [R::from_f64(0.0); 3];
        if let Some(i) = slot {
            d[i] = R::from_f64(1.0);
        }
        Dual { v, d }
    }
    fn value(self) -> R {
        self.v
    }
    fn chain(self, f: R, df: R) -> Self {
        self.map(f, df)
    }
    fn add(self, o: Self) -> Self {
        Dual {
            v: self.v + o.v,
            d: [self.d[0] + o.d[0], self.d[1] + o.d[1], self.d[2] + o.d[2]],
        }
    }
    fn sub(self, o: Self) -> Self {
        Dual {
            v: self.v - o.v,
            d: [self.d[0] - o.d[0], self.d[1] - o.d[1], self.d[2] - o.d[2]],
        }
    }
    fn mul(self, o: Self) -> Self {
        let d = [0, 1, 2].map(|k| self.d[k] * o.v + self.v * o.d[k]);
        Dual { v: self.v * o.v, d }
    }
    fn div(self, o: Self) -> Self {
        let q = self.v / o.v;
        let d = [0, 1, 2].map(|k| (self.d[k] - q * o.d[k]) / o.v);
        Dual { v: q, d }
    }
}

/// Which leaves carry a unit tangent.
#[derive(Clone, Copy)]
enum Seed<'s> {
    Coordinates,
    Parameter(&'s str),
}

impl Expression {
    pub fn parse(text: &str) -> Result<Self, ExprError> {
        Parser::new(text)?.parse_all()
    }

    pub fn constant(c: f64) -> Self {
        Expression::Const(c)
    }

    pub fn var(v: Var) -> Self {
        Expression::Var(v)
    }

    pub fn binary(op: BinaryOp, a: Expression, b: Expression) -> Self {
        Expression::Binary(op, Box::new(a), Box::new(b))
    }

    #[allow(clippy::should_implement_trait)]
    pub fn neg(a: Expression) -> Self {
        Expression::Unary(UnaryOp::Neg, Box::new(a))
    }

    pub fn is_zero_constant(&self) -> bool {
        matches!(self, Expression::Const(c) if *c == 0.0)
    }

    /// Names of all parameters referenced anywhere in the tree.
    pub fn parameters(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_params(&mut out);
        out
    }

    fn collect_params(&self, out: &mut BTreeSet<String>) {
        match self {
            Expression::Const(_) | Expression::Var(_) => {}
            Expression::Param(p) => {
                out.insert(p.clone());
            }
            Expression::Unary(_, a) | Expression::Pow(a, _) | Expression::Cheb(_, a) => {
                a.collect_params(out)
            }
            Expression::Binary(_, a, b) => {
                a.collect_params(out);
                b.collect_params(out);
            }
        }
    }

    pub fn evaluate(&self, at: &EvalPoint) -> Result<f64, ExprError> {
        at.check_finite()?;
        self.walk::<f64>(at, Seed::Coordinates)
    }

    /// Value and `(d/dx, d/dy, d/dz)` by forward propagation.
    pub fn value_and_gradient(&self, at: &EvalPoint) -> Result<(f64, [f64; 3]), ExprError> {
        at.check_finite()?;
        let d = self.walk::<Dual<f64>>(at, Seed::Coordinates)?;
        Ok((d.v, d.d))
    }

    /// As [`Expression::value_and_gradient`], carried out in double-double
    /// arithmetic. Literal constants and coordinates enter as exact `f64`.
    pub fn value_and_gradient_dd(
        &self,
        at: &EvalPoint,
    ) -> Result<(TwoFloat, [TwoFloat; 3]), ExprError> {
        at.check_finite()?;
        let d = self.walk::<Dual<TwoFloat>>(at, Seed::Coordinates)?;
        Ok((d.v, d.d))
    }

    pub fn gradient(&self, at: &EvalPoint) -> Result<[f64; 3], ExprError> {
        self.value_and_gradient(at).map(|(_, g)| g)
    }

    /// Value and derivative with respect to a named parameter, with the
    /// coordinates held fixed. Used for curves parametrized by `t`.
    pub fn derivative_wrt_param(
        &self,
        at: &EvalPoint,
        name: &str,
    ) -> Result<(f64, f64), ExprError> {
        at.check_finite()?;
        let d = self.walk::<Dual<f64>>(at, Seed::Parameter(name))?;
        Ok((d.v, d.d[0]))
    }

    fn walk<S: Scalar>(&self, at: &EvalPoint, seed: Seed) -> Result<S, ExprError> {
        let real = <S::R as Real>::from_f64;
        match self {
            Expression::Const(c) => Ok(S::constant(real(*c))),
            Expression::Var(v) => {
                let slot = match seed {
                    Seed::Coordinates => Some(v.index()),
                    Seed::Parameter(_) => None,
                };
                Ok(S::seeded(real(at.coord(*v)), slot))
            }
            Expression::Param(name) => {
                let value = *at
                    .params
                    .get(name)
                    .ok_or_else(|| ExprError::UnboundParameter(name.clone()))?;
                if !value.is_finite() {
                    return Err(ExprError::Domain(format!("parameter `{name}` = {value}")));
                }
                let slot = match seed {
                    Seed::Parameter(p) if p == name => Some(0),
                    _ => None,
                };
                Ok(S::seeded(real(value), slot))
            }
            Expression::Unary(op, a) => {
                let a = a.walk::<S>(at, seed)?;
                unary::<S>(*op, a)
            }
            Expression::Binary(op, a, b) => {
                let a = a.walk::<S>(at, seed)?;
                let b = b.walk::<S>(at, seed)?;
                match op {
                    BinaryOp::Add => Ok(a.add(b)),
                    BinaryOp::Sub => Ok(a.sub(b)),
                    BinaryOp::Mul => Ok(a.mul(b)),
                    BinaryOp::Div => {
                        if b.value().to_f64() == 0.0 {
                            Err(ExprError::DivisionByZero)
                        } else {
                            Ok(a.div(b))
                        }
                    }
                }
            }
            Expression::Pow(a, k) => {
                let a = a.walk::<S>(at, seed)?;
                let v = a.value();
                if *k < 0 && v.to_f64() == 0.0 {
                    return Err(ExprError::DivisionByZero);
                }
                let f = v.powi(*k);
                let df = if *k == 0 {
                    real(0.0)
                } else {
                    real(f64::from(*k)) * v.powi(*k - 1)
                };
                Ok(a.chain(f, df))
            }
            Expression::Cheb(n, a) => {
                let a = a.walk::<S>(at, seed)?;
                let q = a.value();
                let clamped = cheb_clamp(q.to_f64())?;
                let q = if q.to_f64().abs() > 1.0 {
                    real(clamped)
                } else {
                    q
                };
                let f = S::R::cheb(*n, q);
                let df = if S::TRACKS_DERIVATIVE {
                    cheb_slope_real(*n, q)
                } else {
                    real(0.0)
                };
                Ok(a.chain(f, df))
            }
        }
    }
}

fn unary<S: Scalar>(op: UnaryOp, a: S) -> Result<S, ExprError> {
    let v = a.value();
    let x = v.to_f64();
    let real = <S::R as Real>::from_f64;
    let kink = |what: &str| -> Result<S, ExprError> {
        Err(ExprError::NonDifferentiable(format!("{what} at 0")))
    };
    match op {
        UnaryOp::Neg => Ok(a.chain(-v, real(-1.0))),
        UnaryOp::Sin => Ok(a.chain(v.sin(), v.cos())),
        UnaryOp::Cos => Ok(a.chain(v.cos(), -v.sin())),
        UnaryOp::Sqrt => {
            if x < 0.0 {
                return Err(ExprError::Domain(format!("sqrt of negative value {x}")));
            }
            if S::TRACKS_DERIVATIVE && x == 0.0 {
                return kink("sqrt");
            }
            let s = v.sqrt();
            Ok(a.chain(s, real(0.5) / s))
        }
        UnaryOp::Abs => {
            if S::TRACKS_DERIVATIVE && x == 0.0 {
                return kink("abs");
            }
            let sign = real(x.signum());
            Ok(a.chain(sign * v, sign))
        }
        UnaryOp::Sgn => {
            if S::TRACKS_DERIVATIVE && x == 0.0 {
                return kink("sgn");
            }
            let s = if x > 0.0 {
                1.0
            } else if x < 0.0 {
                -1.0
            } else {
                0.0
            };
            Ok(a.chain(real(s), real(0.0)))
        }
    }
}
// ---------------------------------------------------------------------------
// Canonical printer

impl Expression {
    fn is_atomic(&self) -> bool {
        match self {
            Expression::Const(c) => !c.is_sign_negative(),
            Expression::Var(_) | Expression::Param(_) | Expression::Cheb(..) => true,
            Expression::Unary(op, _) => *op != UnaryOp::Neg,
            _ => false,
        }
    }

    fn fmt_atom(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_atomic() {
            write!(f, "{self}")
        } else {
            write!(f, "({self})")
        }
    }

    fn fmt_operand(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expression::Binary(..) => write!(f, "({self})"),
            _ => write!(f, "{self}"),
        }
    }
}

impl fmt::Display for Expression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            // Same text as the negation of a literal, which is how it reparses.
            Expression::Const(c) if c.is_sign_negative() => write!(f, "-{:?}", -c),
            Expression::Const(c) => write!(f, "{c:?}"),
            Expression::Var(v) => f.write_str(v.name()),
            Expression::Param(p) => f.write_str(p),
            Expression::Unary(UnaryOp::Neg, a) => {
                f.write_str("-")?;
                a.fmt_atom(f)
            }
            Expression::Unary(op, a) => write!(f, "{}({a})", op.name()),
            Expression::Binary(op, a, b) => {
                a.fmt_operand(f)?;
                write!(f, " {} ", op.symbol())?;
                b.fmt_operand(f)
            }
            Expression::Pow(a, k) => {
                a.fmt_atom(f)?;
                write!(f, "^{k}")
            }
            Expression::Cheb(n, a) => write!(f, "cheb({n}, {a})"),
        }
    }
}

impl FromStr for Expression {
    type Err = ExprError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Expression::parse(s)
    }
}

// ---------------------------------------------------------------------------
// Lexer and recursive-descent parser

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Number { value: f64, integral: bool },
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    Comma,
    End,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Number { value, .. } => format!("number {value}"),
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Plus => "`+`".into(),
            Tok::Minus => "`-`".into(),
            Tok::Star => "`*`".into(),
            Tok::Slash => "`/`".into(),
            Tok::Caret => "`^`".into(),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::Comma => "`,`".into(),
            Tok::End => "end of input".into(),
        }
    }
}

fn lex(text: &str) -> Result<Vec<(Tok, usize)>, ExprError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        let tok = match c {
            b'+' => Tok::Plus,
            b'-' => Tok::Minus,
            b'*' => Tok::Star,
            b'/' => Tok::Slash,
            b'^' => Tok::Caret,
            b'(' => Tok::LParen,
            b')' => Tok::RParen,
            b',' => Tok::Comma,
            b'0'..=b'9' | b'.' => {
                let mut integral = true;
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
                if i < bytes.len() && bytes[i] == b'.' {
                    integral = false;
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
                        integral = false;
                        i = j;
                        while i < bytes.len() && bytes[i].is_ascii_digit() {
                            i += 1;
                        }
                    }
                }
                let lit = &text[start..i];
                let value: f64 = lit.parse().map_err(|_| ExprError::Syntax {
                    offset: start,
                    message: format!("malformed number `{lit}`"),
                })?;
                out.push((Tok::Number { value, integral }, start));
                continue;
            }
            c if c.is_ascii_alphabetic() || c == b'_' => {
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                out.push((Tok::Ident(text[start..i].to_string()), start));
                continue;
            }
            _ => {
                let ch = text[start..].chars().next().unwrap_or('?');
                return Err(ExprError::Syntax {
                    offset: start,
                    message: format!("unexpected character `{ch}`"),
                });
            }
        };
        out.push((tok, start));
        i += 1;
    }
    out.push((Tok::End, text.len()));
    Ok(out)
}

const FUNCTIONS: [&str; 6] = ["sin", "cos", "sqrt", "abs", "sgn", "cheb"];

struct Parser {
    toks: Vec<(Tok, usize)>,
    pos: usize,
}

impl Parser {
    fn new(text: &str) -> Result<Self, ExprError> {
        Ok(Parser {
            toks: lex(text)?,
            pos: 0,
        })
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn offset(&self) -> usize {
        self.toks[self.pos].1
    }

    fn bump(&mut self) -> (Tok, usize) {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn unexpected<T>(&self, expected: &str) -> Result<T, ExprError> {
        Err(ExprError::Syntax {
            offset: self.offset(),
            message: format!("expected {expected}, found {}", self.peek().describe()),
        })
    }

    fn expect(&mut self, tok: Tok, expected: &str) -> Result<(), ExprError> {
        if *self.peek() == tok {
            self.bump();
            Ok(())
        } else {
            self.unexpected(expected)
        }
    }

    fn parse_all(mut self) -> Result<Expression, ExprError> {
        if *self.peek() == Tok::End {
            return self.unexpected("an expression");
        }
        let e = self.expr()?;
        if *self.peek() != Tok::End {
            return self.unexpected("an operator or end of input");
        }
        Ok(e)
    }

    fn expr(&mut self) -> Result<Expression, ExprError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Tok::Plus => BinaryOp::Add,
                Tok::Minus => BinaryOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.term()?;
            lhs = Expression::binary(op, lhs, rhs);
        }
    }

    fn term(&mut self) -> Result<Expression, ExprError> {
        let mut lhs = self.factor()?;
        loop {
            let op = match self.peek() {
                Tok::Star => BinaryOp::Mul,
                Tok::Slash => BinaryOp::Div,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.factor()?;
            lhs = Expression::binary(op, lhs, rhs);
        }
    }

    fn factor(&mut self) -> Result<Expression, ExprError> {
        let negate = if *self.peek() == Tok::Minus {
            self.bump();
            true
        } else {
            false
        };
        let mut e = self.atom()?;
        if *self.peek() == Tok::Caret {
            self.bump();
            let k = self.literal_int("exponent", true)?;
            let k = i32::try_from(k).map_err(|_| ExprError::Syntax {
                offset: self.toks[self.pos.saturating_sub(1)].1,
                message: "exponent out of range".into(),
            })?;
            e = Expression::Pow(Box::new(e), k);
        }
        Ok(if negate { Expression::neg(e) } else { e })
    }

    fn literal_int(&mut self, what: &'static str, signed: bool) -> Result<i64, ExprError> {
        let offset = self.offset();
        let sign = if signed && *self.peek() == Tok::Minus {
            self.bump();
            -1
        } else {
            1
        };
        match self.peek().clone() {
            Tok::Number {
                value,
                integral: true,
            } if value <= i32::MAX as f64 => {
                self.bump();
                Ok(sign * value as i64)
            }
            Tok::Number { .. } | Tok::Ident(_) | Tok::LParen | Tok::Minus => {
                Err(ExprError::NonLiteral { offset, what })
            }
            _ => self.unexpected(what),
        }
    }

    fn atom(&mut self) -> Result<Expression, ExprError> {
        let (tok, offset) = self.bump();
        match tok {
            Tok::Number { value, .. } => Ok(Expression::Const(value)),
            Tok::LParen => {
                let e = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(e)
            }
            Tok::Ident(name) => {
                if *self.peek() == Tok::LParen {
                    self.bump();
                    return self.call(&name, offset);
                }
                if FUNCTIONS.contains(&name.as_str()) {
                    return self.unexpected("`(` after function name");
                }
                Ok(match name.as_str() {
                    "x" => Expression::Var(Var::X),
                    "y" => Expression::Var(Var::Y),
                    "z" => Expression::Var(Var::Z),
                    _ => Expression::Param(name),
                })
            }
            other => Err(ExprError::Syntax {
                offset,
                message: format!("expected an operand, found {}", other.describe()),
            }),
        }
    }

    fn call(&mut self, name: &str, offset: usize) -> Result<Expression, ExprError> {
        if name == "cheb" {
            let order_at = self.offset();
            let n = self.literal_int("cheb order", false)?;
            let n = u32::try_from(n).map_err(|_| ExprError::NonLiteral {
                offset: order_at,
                what: "cheb order",
            })?;
            self.expect(Tok::Comma, "`,`")?;
            let arg = self.expr()?;
            self.expect(Tok::RParen, "`)`")?;
            return Ok(Expression::Cheb(n, Box::new(arg)));
        }
        let op = UnaryOp::from_name(name).ok_or_else(|| ExprError::UnknownFunction {
            offset,
            name: name.to_string(),
        })?;
        let arg = self.expr()?;
        self.expect(Tok::RParen, "`)`")?;
        Ok(Expression::Unary(op, Box::new(arg)))
    }
}
