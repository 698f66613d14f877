//! A small expression grammar for model configuration files, with forward-mode
//! dual-number differentiation.
//!
//! Grammar: numeric literals, the variable `x`, `+ - * /`, unary `-`, `^` with
//! a numeric exponent, `exp`, `log`, `cosh`, `abs`, and parentheses.
//! First derivatives come from dual numbers; second derivatives from nesting
//! duals. `abs` has derivative zero at the origin by convention.

use std::fmt;
use std::sync::Arc;

/// Parse failure with the byte offset of the offending token.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseError {
    pub offset: usize,
    pub message: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "syntax error at offset {}: {}",
            self.offset, self.message
        )
    }
}

impl std::error::Error for ParseError {}

/// Scalar abstraction evaluated by the expression tree: `f64` or nested
/// dual numbers.
pub trait Num: Copy {
    fn constant(c: f64) -> Self;
    fn add(self, o: Self) -> Self;
    fn sub(self, o: Self) -> Self;
    fn mul(self, o: Self) -> Self;
    fn div(self, o: Self) -> Self;
    fn neg(self) -> Self;
    fn exp(self) -> Self;
    fn ln(self) -> Self;
    fn cosh(self) -> Self;
    fn abs(self) -> Self;
    fn pow_const(self, p: f64) -> Self;
    /// Sign of the underlying primal value (`0` at the origin).
    fn primal_sign(self) -> f64;
}

impl Num for f64 {
    fn constant(c: f64) -> Self {
        c
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
    fn neg(self) -> Self {
        -self
    }
    fn exp(self) -> Self {
        f64::exp(self)
    }
    fn ln(self) -> Self {
        f64::ln(self)
    }
    fn cosh(self) -> Self {
        f64::cosh(self)
    }
    fn abs(self) -> Self {
        f64::abs(self)
    }
    fn pow_const(self, p: f64) -> Self {
        self.powf(p)
    }
    fn primal_sign(self) -> f64 {
        if self > 0.0 {
            1.0
        } else if self < 0.0 {
            -1.0
        } else {
            0.0
        }
    }
}

/// Forward-mode dual number over any scalar.
#[derive(Debug, Clone, Copy)]
pub struct Dual<T> {
    pub v: T,
    pub d: T,
}

impl<T: Num> Dual<T> {
    pub fn variable(v: T) -> Self {
        Dual {
            v,
            d: T::constant(1.0),
        }
    }
}

impl<T: Num> Num for Dual<T> {
    fn constant(c: f64) -> Self {
        Dual {
            v: T::constant(c),
            d: T::constant(0.0),
        }
    }
    fn add(self, o: Self) -> Self {
        Dual {
            v: self.v.add(o.v),
            d: self.d.add(o.d),
        }
    }
    fn sub(self, o: Self) -> Self {
        Dual {
            v: self.v.sub(o.v),
            d: self.d.sub(o.d),
        }
    }
    fn mul(self, o: Self) -> Self {
        Dual {
            v: self.v.mul(o.v),
            d: self.v.mul(o.d).add(self.d.mul(o.v)),
        }
    }
    fn div(self, o: Self) -> Self {
        let quotient = self.v.div(o.v);
        Dual {
            v: quotient,
            d: self.d.sub(quotient.mul(o.d)).div(o.v),
        }
    }
    fn neg(self) -> Self {
        Dual {
            v: self.v.neg(),
            d: self.d.neg(),
        }
    }
    fn exp(self) -> Self {
        let e = self.v.exp();
        Dual {
            v: e,
            d: self.d.mul(e),
        }
    }
    fn ln(self) -> Self {
        Dual {
            v: self.v.ln(),
            d: self.d.div(self.v),
        }
    }
    fn cosh(self) -> Self {
        // sinh via (exp(v) - exp(-v)) / 2 keeps the trait surface small.
        let ev = self.v.exp();
        let emv = self.v.neg().exp();
        let half = T::constant(0.5);
        let sinh = ev.sub(emv).mul(half);
        Dual {
            v: ev.add(emv).mul(half),
            d: self.d.mul(sinh),
        }
    }
    fn abs(self) -> Self {
        let s = T::constant(self.v.primal_sign());
        Dual {
            v: self.v.abs(),
            d: self.d.mul(s),
        }
    }
    fn pow_const(self, p: f64) -> Self {
        let scaled = self.v.pow_const(p - 1.0).mul(T::constant(p));
        Dual {
            v: self.v.pow_const(p),
            d: self.d.mul(scaled),
        }
    }
    fn primal_sign(self) -> f64 {
        self.v.primal_sign()
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Const(f64),
    Var,
    Add(Box<Node>, Box<Node>),
    Sub(Box<Node>, Box<Node>),
    Mul(Box<Node>, Box<Node>),
    Div(Box<Node>, Box<Node>),
    Neg(Box<Node>),
    Pow(Box<Node>, f64),
    Exp(Box<Node>),
    Log(Box<Node>),
    Cosh(Box<Node>),
    Abs(Box<Node>),
}

impl Node {
    fn eval<T: Num>(&self, x: T) -> T {
        match self {
            Node::Const(c) => T::constant(*c),
            Node::Var => x,
            Node::Add(a, b) => a.eval(x).add(b.eval(x)),
            Node::Sub(a, b) => a.eval(x).sub(b.eval(x)),
            Node::Mul(a, b) => a.eval(x).mul(b.eval(x)),
            Node::Div(a, b) => a.eval(x).div(b.eval(x)),
            Node::Neg(a) => a.eval(x).neg(),
            Node::Pow(a, p) => a.eval(x).pow_const(*p),
            Node::Exp(a) => a.eval(x).exp(),
            Node::Log(a) => a.eval(x).ln(),
            Node::Cosh(a) => a.eval(x).cosh(),
            Node::Abs(a) => a.eval(x).abs(),
        }
    }
}

/// A parsed expression of one variable with first and second derivatives.
#[derive(Clone)]
pub struct Expression {
    root: Arc<Node>,
    text: String,
}

impl Expression {
    pub fn parse(text: &str) -> Result<Self, ParseError> {
        let mut p = Parser {
            bytes: text.as_bytes(),
            pos: 0,
        };
        p.skip_ws();
        let root = p.parse_expr()?;
        p.skip_ws();
        if p.pos != p.bytes.len() {
            return Err(p.error("unexpected trailing input"));
        }
        Ok(Expression {
            root: Arc::new(root),
            text: text.to_string(),
        })
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.root.eval(x)
    }

    /// First derivative by a dual-number pass.
    pub fn d1(&self, x: f64) -> f64 {
        self.root.eval(Dual::variable(x)).d
    }

    /// Second derivative by nesting duals.
    pub fn d2(&self, x: f64) -> f64 {
        let inner = Dual::variable(x);
        let nested = Dual {
            v: inner,
            d: Dual::<f64>::constant(1.0),
        };
        self.root.eval(nested).d.d
    }

    /// Value, first and second derivative in one pass.
    pub fn eval_all(&self, x: f64) -> (f64, f64, f64) {
        let inner = Dual::variable(x);
        let nested = Dual {
            v: inner,
            d: Dual::<f64>::constant(1.0),
        };
        let out = self.root.eval(nested);
        (out.v.v, out.v.d, out.d.d)
    }
}

impl fmt::Debug for Expression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Expression({})", self.text)
    }
}

struct Parser<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Parser<'a> {
    fn error(&self, message: &str) -> ParseError {
        ParseError {
            offset: self.pos,
            message: message.to_string(),
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&self) -> Option<u8> {
        self.bytes.get(self.pos).copied()
    }

    fn eat(&mut self, c: u8) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn parse_expr(&mut self) -> Result<Node, ParseError> {
        let mut node = self.parse_term()?;
        loop {
            self.skip_ws();
            if self.eat(b'+') {
                node = Node::Add(Box::new(node), Box::new(self.parse_term()?));
            } else if self.eat(b'-') {
                node = Node::Sub(Box::new(node), Box::new(self.parse_term()?));
            } else {
                return Ok(node);
            }
        }
    }

    fn parse_term(&mut self) -> Result<Node, ParseError> {
        let mut node = self.parse_unary()?;
        loop {
            self.skip_ws();
            if self.eat(b'*') {
                node = Node::Mul(Box::new(node), Box::new(self.parse_unary()?));
            } else if self.eat(b'/') {
                node = Node::Div(Box::new(node), Box::new(self.parse_unary()?));
            } else {
                return Ok(node);
            }
        }
    }

    fn parse_unary(&mut self) -> Result<Node, ParseError> {
        self.skip_ws();
        if self.eat(b'-') {
            return Ok(Node::Neg(Box::new(self.parse_unary()?)));
        }
        self.parse_power()
    }

    fn parse_power(&mut self) -> Result<Node, ParseError> {
        let base = self.parse_atom()?;
        self.skip_ws();
        if self.eat(b'^') {
            self.skip_ws();
            let sign = if self.eat(b'-') { -1.0 } else { 1.0 };
            self.skip_ws();
            let p = self.parse_number()?;
            return Ok(Node::Pow(Box::new(base), sign * p));
        }
        Ok(base)
    }

    fn parse_atom(&mut self) -> Result<Node, ParseError> {
        self.skip_ws();
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let inner = self.parse_expr()?;
                self.skip_ws();
                if !self.eat(b')') {
                    return Err(self.error("expected ')'"));
                }
                Ok(inner)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => Ok(Node::Const(self.parse_number()?)),
            Some(c) if c.is_ascii_alphabetic() => {
                let start = self.pos;
                while self
                    .peek()
                    .is_some_and(|c| c.is_ascii_alphanumeric() || c == b'_')
                {
                    self.pos += 1;
                }
                let name = std::str::from_utf8(&self.bytes[start..self.pos]).unwrap();
                match name {
                    "x" => Ok(Node::Var),
                    "exp" | "log" | "cosh" | "abs" => {
                        self.skip_ws();
                        if !self.eat(b'(') {
                            return Err(self.error("expected '(' after function name"));
                        }
                        let arg = Box::new(self.parse_expr()?);
                        self.skip_ws();
                        if !self.eat(b')') {
                            return Err(self.error("expected ')'"));
                        }
                        Ok(match name {
                            "exp" => Node::Exp(arg),
                            "log" => Node::Log(arg),
                            "cosh" => Node::Cosh(arg),
                            _ => Node::Abs(arg),
                        })
                    }
                    other => {
                        self.pos = start;
                        Err(self.error(&format!("unknown identifier '{other}'")))
                    }
                }
            }
            _ => Err(self.error("expected a number, 'x', a function call or '('")),
        }
    }

    fn parse_number(&mut self) -> Result<f64, ParseError> {
        let start = self.pos;
        while self
            .peek()
            .is_some_and(|c| c.is_ascii_digit() || c == b'.' || c == b'e' || c == b'E')
        {
            // Exponent sign directly after e/E.
            self.pos += 1;
            if matches!(self.bytes.get(self.pos - 1), Some(b'e') | Some(b'E'))
                && matches!(self.peek(), Some(b'+') | Some(b'-'))
            {
                self.pos += 1;
            }
        }
        if start == self.pos {
            return Err(self.error("expected a number"));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .unwrap()
            .parse::<f64>()
            .map_err(|_| ParseError {
                offset: start,
                message: "malformed number".to_string(),
            })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn exp_of_negated_variable() {
        let e = Expression::parse("exp(-x)").unwrap();
        let (v, d1, d2) = e.eval_all(0.0);
        assert_abs_diff_eq!(v, 1.0);
        assert_abs_diff_eq!(d1, -1.0);
        assert_abs_diff_eq!(d2, 1.0);
    }

    #[test]
    fn cosh_of_shifted_square() {
        let e = Expression::parse("cosh(5 - x^2)").unwrap();
        assert_abs_diff_eq!(e.eval(0.0), 5.0_f64.cosh());
        // d/dx cosh(5 - x^2) = -2x sinh(5 - x^2)
        assert_abs_diff_eq!(e.d1(1.0), -2.0 * 4.0_f64.sinh(), epsilon = 1e-9);
    }

    #[test]
    fn unbalanced_parenthesis_offset() {
        let err = Expression::parse("(x").unwrap_err();
        assert_eq!(err.offset, 2);
    }

    #[test]
    fn unknown_identifier_is_rejected() {
        let err = Expression::parse("sinh(x)").unwrap_err();
        assert_eq!(err.offset, 0);
    }

    #[test]
    fn abs_derivative_convention_at_zero() {
        let e = Expression::parse("abs(x)").unwrap();
        assert_abs_diff_eq!(e.d1(0.0), 0.0);
        assert_abs_diff_eq!(e.d1(2.0), 1.0);
        assert_abs_diff_eq!(e.d1(-2.0), -1.0);
    }

    #[test]
    fn power_with_negative_exponent() {
        let e = Expression::parse("x^-2").unwrap();
        assert_abs_diff_eq!(e.eval(2.0), 0.25);
        assert_abs_diff_eq!(e.d1(2.0), -2.0 * 2.0_f64.powf(-3.0), epsilon = 1e-12);
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let exprs = [
            "exp(-x) + x^2",
            "cosh(5 - x^2)",
            "-log(x + 10) + x",
            "exp(abs(x)) * 0.5",
            "(x + 1) / (x^2 + 3)",
            "0.2 * (10 - exp(abs(x)))^2",
        ];
        let points = [-2.3, -1.1, 0.7, 1.9, 3.2];
        for text in exprs {
            let e = Expression::parse(text).unwrap();
            for &x in &points {
                let h = 1e-5;
                let fd1 = (e.eval(x + h) - e.eval(x - h)) / (2.0 * h);
                let fd2 = (e.eval(x + h) - 2.0 * e.eval(x) + e.eval(x - h)) / (h * h);
                let (_, d1, d2) = e.eval_all(x);
                assert_abs_diff_eq!(d1, fd1, epsilon = 1e-4 * (1.0 + fd1.abs()));
                assert_abs_diff_eq!(d2, fd2, epsilon = 1e-3 * (1.0 + fd2.abs()));
            }
        }
    }

    #[test]
    fn domain_error_surfaces_as_nan() {
        let e = Expression::parse("log(x)").unwrap();
        assert!(e.eval(-1.0).is_nan());
    }
}
