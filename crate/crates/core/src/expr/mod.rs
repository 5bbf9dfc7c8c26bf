//! Symbolic expressions in one real variable `x`.
//!
//! Expressions are immutable, reference-counted trees. The smart
//! constructors ([`Expr::add`], [`Expr::mul`], ...) fold constants and
//! drop neutral elements; the parser builds trees verbatim so that printing
//! and re-parsing reproduces the same evaluation bit for bit.

mod diff;
mod parse;
mod singular;

use std::fmt;
use std::sync::Arc;

use crate::error::EvalError;

pub use parse::{parse, parse_with, Bindings};
pub(crate) use singular::{golden_min, sort_dedup as sort_dedup_points};
pub use singular::{singular_points, SingularSet, DEFAULT_SCAN_POINTS};

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Const(f64),
    Var,
    Neg(Expr),
    Add(Expr, Expr),
    Sub(Expr, Expr),
    Mul(Expr, Expr),
    Div(Expr, Expr),
    Pow(Expr, Expr),
    Exp(Expr),
    Log(Expr),
    Abs(Expr),
    Sgn(Expr),
    Min(Expr, Expr),
    Max(Expr, Expr),
}

#[derive(Clone, PartialEq)]
pub struct Expr(Arc<Node>);

impl fmt::Debug for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Expr({self})")
    }
}

impl Expr {
    pub fn from_node(node: Node) -> Self {
        Expr(Arc::new(node))
    }

    pub fn node(&self) -> &Node {
        &self.0
    }

    pub fn constant(c: f64) -> Self {
        Self::from_node(Node::Const(c))
    }

    pub fn x() -> Self {
        Self::from_node(Node::Var)
    }

    pub fn zero() -> Self {
        Self::constant(0.0)
    }

    pub fn one() -> Self {
        Self::constant(1.0)
    }

    pub fn as_const(&self) -> Option<f64> {
        match self.node() {
            Node::Const(c) => Some(*c),
            _ => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.as_const() == Some(0.0)
    }

    pub fn is_one(&self) -> bool {
        self.as_const() == Some(1.0)
    }

    /// True when the tree does not mention `x`.
    pub fn is_constant(&self) -> bool {
        match self.node() {
            Node::Const(_) => true,
            Node::Var => false,
            Node::Neg(a) | Node::Exp(a) | Node::Log(a) | Node::Abs(a) | Node::Sgn(a) => {
                a.is_constant()
            }
            Node::Add(a, b)
            | Node::Sub(a, b)
            | Node::Mul(a, b)
            | Node::Div(a, b)
            | Node::Pow(a, b)
            | Node::Min(a, b)
            | Node::Max(a, b) => a.is_constant() && b.is_constant(),
        }
    }

    /// Value of a closed (variable-free) expression, if it evaluates.
    pub fn constant_value(&self) -> Option<f64> {
        if self.is_constant() {
            self.eval(0.0).ok()
        } else {
            None
        }
    }

    pub fn children(&self) -> Vec<&Expr> {
        match self.node() {
            Node::Const(_) | Node::Var => vec![],
            Node::Neg(a) | Node::Exp(a) | Node::Log(a) | Node::Abs(a) | Node::Sgn(a) => vec![a],
            Node::Add(a, b)
            | Node::Sub(a, b)
            | Node::Mul(a, b)
            | Node::Div(a, b)
            | Node::Pow(a, b)
            | Node::Min(a, b)
            | Node::Max(a, b) => vec![a, b],
        }
    }

    pub fn size(&self) -> usize {
        1 + self.children().iter().map(|c| c.size()).sum::<usize>()
    }

    pub fn depth(&self) -> usize {
        1 + self.children().iter().map(|c| c.depth()).max().unwrap_or(0)
    }

    // Smart constructors. These fold constants and neutral elements but never
    // reorder operands, so no floating-point result changes except through
    // the folding itself.

    pub fn neg(a: Expr) -> Expr {
        match a.node() {
            Node::Const(c) => Expr::constant(-c),
            Node::Neg(inner) => inner.clone(),
            _ => Expr::from_node(Node::Neg(a)),
        }
    }

    pub fn add(a: Expr, b: Expr) -> Expr {
        match (a.as_const(), b.as_const()) {
            (Some(x), Some(y)) => Expr::constant(x + y),
            (Some(x), _) if x == 0.0 => b,
            (_, Some(y)) if y == 0.0 => a,
            _ => Expr::from_node(Node::Add(a, b)),
        }
    }

    pub fn sub(a: Expr, b: Expr) -> Expr {
        match (a.as_const(), b.as_const()) {
            (Some(x), Some(y)) => Expr::constant(x - y),
            (Some(x), _) if x == 0.0 => Expr::neg(b),
            (_, Some(y)) if y == 0.0 => a,
            _ => Expr::from_node(Node::Sub(a, b)),
        }
    }

    pub fn mul(a: Expr, b: Expr) -> Expr {
        match (a.as_const(), b.as_const()) {
            (Some(x), Some(y)) => Expr::constant(x * y),
            (Some(x), _) | (_, Some(x)) if x == 0.0 => Expr::zero(),
            (Some(x), _) if x == 1.0 => b,
            (_, Some(y)) if y == 1.0 => a,
            (Some(x), _) if x == -1.0 => Expr::neg(b),
            (_, Some(y)) if y == -1.0 => Expr::neg(a),
            _ => Expr::from_node(Node::Mul(a, b)),
        }
    }

    pub fn div(a: Expr, b: Expr) -> Expr {
        match (a.as_const(), b.as_const()) {
            (Some(x), Some(y)) if y != 0.0 => Expr::constant(x / y),
            (Some(x), _) if x == 0.0 => Expr::zero(),
            (_, Some(y)) if y == 1.0 => a,
            _ => Expr::from_node(Node::Div(a, b)),
        }
    }

    pub fn pow(a: Expr, b: Expr) -> Expr {
        match (a.as_const(), b.as_const()) {
            (Some(_), Some(_)) => {
                let folded = Expr::from_node(Node::Pow(a.clone(), b.clone()));
                match folded.eval(0.0) {
                    Ok(v) => Expr::constant(v),
                    Err(_) => folded,
                }
            }
            (_, Some(y)) if y == 0.0 => Expr::one(),
            (_, Some(y)) if y == 1.0 => a,
            (Some(x), _) if x == 1.0 => Expr::one(),
            _ => Expr::from_node(Node::Pow(a, b)),
        }
    }

    pub fn powf(a: Expr, c: f64) -> Expr {
        Expr::pow(a, Expr::constant(c))
    }

    pub fn exp(a: Expr) -> Expr {
        match a.as_const() {
            Some(c) => Expr::constant(c.exp()),
            None => Expr::from_node(Node::Exp(a)),
        }
    }

    pub fn log(a: Expr) -> Expr {
        match a.as_const() {
            Some(c) if c > 0.0 => Expr::constant(c.ln()),
            _ => Expr::from_node(Node::Log(a)),
        }
    }

    pub fn abs(a: Expr) -> Expr {
        match a.as_const() {
            Some(c) => Expr::constant(c.abs()),
            None => Expr::from_node(Node::Abs(a)),
        }
    }

    pub fn sgn(a: Expr) -> Expr {
        match a.as_const() {
            Some(c) => Expr::constant(sgn(c)),
            None => Expr::from_node(Node::Sgn(a)),
        }
    }

    pub fn min(a: Expr, b: Expr) -> Expr {
        match (a.as_const(), b.as_const()) {
            (Some(x), Some(y)) => Expr::constant(x.min(y)),
            _ => Expr::from_node(Node::Min(a, b)),
        }
    }

    pub fn max(a: Expr, b: Expr) -> Expr {
        match (a.as_const(), b.as_const()) {
            (Some(x), Some(y)) => Expr::constant(x.max(y)),
            _ => Expr::from_node(Node::Max(a, b)),
        }
    }

    /// Evaluate at `x`. Domain violations are reported, never turned into NaN.
    pub fn eval(&self, x: f64) -> Result<f64, EvalError> {
        let v = match self.node() {
            Node::Const(c) => *c,
            Node::Var => x,
            Node::Neg(a) => -a.eval(x)?,
            Node::Add(a, b) => a.eval(x)? + b.eval(x)?,
            Node::Sub(a, b) => a.eval(x)? - b.eval(x)?,
            Node::Mul(a, b) => a.eval(x)? * b.eval(x)?,
            Node::Div(a, b) => {
                let num = a.eval(x)?;
                let den = b.eval(x)?;
                if den == 0.0 {
                    return Err(EvalError::DivisionByZero { x });
                }
                num / den
            }
            Node::Pow(a, b) => pow_checked(a.eval(x)?, b.eval(x)?, x)?,
            Node::Exp(a) => a.eval(x)?.exp(),
            Node::Log(a) => {
                let arg = a.eval(x)?;
                if arg <= 0.0 {
                    return Err(EvalError::LogNonPositive { x, arg });
                }
                arg.ln()
            }
            Node::Abs(a) => a.eval(x)?.abs(),
            Node::Sgn(a) => sgn(a.eval(x)?),
            Node::Min(a, b) => a.eval(x)?.min(b.eval(x)?),
            Node::Max(a, b) => a.eval(x)?.max(b.eval(x)?),
        };
        if v.is_finite() {
            Ok(v)
        } else {
            Err(EvalError::NonFinite { x })
        }
    }

    /// Evaluate, mapping any failure to NaN. Handy for sampling.
    pub fn eval_or_nan(&self, x: f64) -> f64 {
        self.eval(x).unwrap_or(f64::NAN)
    }

    pub fn differentiate(&self) -> Expr {
        diff::differentiate(self)
    }
}

/// Serde adapter storing an expression as its printed text.
pub mod as_text {
    use serde::{Deserialize, Deserializer, Serializer};

    use super::Expr;

    pub fn serialize<S: Serializer>(e: &Expr, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&e.to_string())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Expr, D::Error> {
        let text = String::deserialize(d)?;
        super::parse(&text).map_err(serde::de::Error::custom)
    }
}

/// Sign with `sgn(0) = 0`.
pub fn sgn(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

fn pow_checked(base: f64, exponent: f64, x: f64) -> Result<f64, EvalError> {
    if base > 0.0 {
        return Ok(base.powf(exponent));
    }
    if base == 0.0 {
        return if exponent > 0.0 {
            Ok(0.0)
        } else if exponent == 0.0 {
            Ok(1.0)
        } else {
            Err(EvalError::DivisionByZero { x })
        };
    }
    if exponent.fract() == 0.0 {
        Ok(base.powf(exponent))
    } else {
        Err(EvalError::NegativeBase { x, base, exponent })
    }
}

// Printing is fully parenthesised so that the parser rebuilds the same tree.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.node() {
            Node::Const(c) => {
                if *c < 0.0 || (*c == 0.0 && c.is_sign_negative()) {
                    write!(f, "(-{})", -c)
                } else {
                    write!(f, "{c}")
                }
            }
            Node::Var => write!(f, "x"),
            Node::Neg(a) => write!(f, "(-{a})"),
            Node::Add(a, b) => write!(f, "({a} + {b})"),
            Node::Sub(a, b) => write!(f, "({a} - {b})"),
            Node::Mul(a, b) => write!(f, "({a} * {b})"),
            Node::Div(a, b) => write!(f, "({a} / {b})"),
            Node::Pow(a, b) => write!(f, "({a} ^ {b})"),
            Node::Exp(a) => write!(f, "exp({a})"),
            Node::Log(a) => write!(f, "log({a})"),
            Node::Abs(a) => write!(f, "abs({a})"),
            Node::Sgn(a) => write!(f, "sgn({a})"),
            Node::Min(a, b) => write!(f, "min({a}, {b})"),
            Node::Max(a, b) => write!(f, "max({a}, {b})"),
        }
    }
}

macro_rules! impl_binop {
    ($tr:ident, $m:ident, $ctor:ident) => {
        impl std::ops::$tr for Expr {
            type Output = Expr;
            fn $m(self, rhs: Expr) -> Expr {
                Expr::$ctor(self, rhs)
            }
        }
        impl std::ops::$tr<f64> for Expr {
            type Output = Expr;
            fn $m(self, rhs: f64) -> Expr {
                Expr::$ctor(self, Expr::constant(rhs))
            }
        }
        impl std::ops::$tr<Expr> for f64 {
            type Output = Expr;
            fn $m(self, rhs: Expr) -> Expr {
                Expr::$ctor(Expr::constant(self), rhs)
            }
        }
        impl std::ops::$tr<&Expr> for &Expr {
            type Output = Expr;
            fn $m(self, rhs: &Expr) -> Expr {
                Expr::$ctor(self.clone(), rhs.clone())
            }
        }
    };
}

impl_binop!(Add, add, add);
impl_binop!(Sub, sub, sub);
impl_binop!(Mul, mul, mul);
impl_binop!(Div, div, div);

impl std::ops::Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::neg(self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eval_basics() {
        assert_eq!(parse("exp(x)").unwrap().eval(0.0), Ok(1.0));
        assert_eq!(parse("2-exp(-x^2)").unwrap().eval(0.0), Ok(1.0));
        assert!(matches!(
            parse("log(x)").unwrap().eval(-1.0),
            Err(EvalError::LogNonPositive { .. })
        ));
        assert!(matches!(
            parse("1/x").unwrap().eval(0.0),
            Err(EvalError::DivisionByZero { .. })
        ));
        assert_eq!(parse("sgn(x)").unwrap().eval(0.0), Ok(0.0));
        assert_eq!(parse("(-8)^3").unwrap().eval(0.0), Ok(-512.0));
        assert!(parse("(-8)^0.5").unwrap().eval(0.0).is_err());
        assert_eq!(parse("0^0").unwrap().eval(0.0), Ok(1.0));
        assert!(parse("exp(x)").unwrap().eval(1000.0).is_err());
    }

    #[test]
    fn smart_constructors_fold() {
        let x = Expr::x();
        assert_eq!(Expr::mul(Expr::zero(), x.clone()), Expr::zero());
        assert_eq!(Expr::add(x.clone(), Expr::zero()), x);
        assert_eq!(Expr::pow(x.clone(), Expr::one()), x);
        assert_eq!(Expr::neg(Expr::neg(x.clone())), x);
        assert_eq!(
            Expr::pow(Expr::constant(2.0), Expr::constant(3.0)),
            Expr::constant(8.0)
        );
        assert!((2.0 * x.clone() + 1.0).eval(3.0) == Ok(7.0));
    }

    #[test]
    fn display_reparses_to_same_tree() {
        let e = parse("2 - exp(-x^2) + min(x, 3)/abs(x - 1) * sgn(x)").unwrap();
        let again = parse(&e.to_string()).unwrap();
        assert_eq!(e, again);
        let c = Expr::constant(-2.5) * Expr::x();
        assert_eq!(parse(&c.to_string()).unwrap().eval(1.5), c.eval(1.5));
    }
}
