//! Error types shared across the crate.

use thiserror::Error;

/// Pointwise evaluation failure of an expression.
#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum EvalError {
    #[error("log of nonpositive argument {arg} at x = {x}")]
    LogNonPositive { x: f64, arg: f64 },
    #[error("division by zero at x = {x}")]
    DivisionByZero { x: f64 },
    #[error("negative base {base} raised to non-integer power {exponent} at x = {x}")]
    NegativeBase { x: f64, base: f64, exponent: f64 },
    #[error("non-finite value at x = {x}")]
    NonFinite { x: f64 },
}

impl EvalError {
    pub fn x(&self) -> f64 {
        match *self {
            EvalError::LogNonPositive { x, .. }
            | EvalError::DivisionByZero { x }
            | EvalError::NegativeBase { x, .. }
            | EvalError::NonFinite { x } => x,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("syntax error at position {pos}: {msg}")]
    Syntax { pos: usize, msg: String },
    #[error("unknown identifier `{name}` at position {pos}")]
    UnknownIdentifier { pos: usize, name: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum DomainError {
    #[error("empty interval ({lo}, {hi})")]
    EmptyInterval { lo: f64, hi: f64 },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QuadError {
    #[error("tolerance must be positive, got {0}")]
    InvalidTolerance(f64),
    #[error("integrand not finite at x = {x} (value {value})")]
    NonFinite { x: f64, value: f64 },
    #[error("empty or inverted panel [{lo}, {hi}]")]
    BadPanel { lo: f64, hi: f64 },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpaceError {
    #[error("exponent out of range: {reason}")]
    ExponentOutOfRange { reason: String },
    #[error("integrability probe failed for {what} on {on}")]
    IntegrabilityProbeFailed { what: String, on: String },
    #[error("no finite bracket for the Luxemburg norm below lambda = {0}")]
    NoFiniteBracket(f64),
    #[error("modular diverges: {0}")]
    Divergent(String),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Quad(#[from] QuadError),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum InstanceError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("zero set of {what} could not be bracketed near {near:?}")]
    ZeroSetUnresolved { what: String, near: Vec<f64> },
    #[error("unknown preset `{0}`")]
    UnknownPreset(String),
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Space(#[from] SpaceError),
    #[error(transparent)]
    Domain(#[from] DomainError),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum VerifyError {
    #[error("invalid test function: {0}")]
    InvalidTestFunction(String),
    #[error("instance is not admissible ({0}); run check_crucial for details")]
    Inadmissible(String),
    #[error("{side} integral diverges (weight too singular for this test function)")]
    Divergent { side: &'static str },
    #[error("{side}: {source}")]
    Quadrature {
        side: &'static str,
        #[source]
        source: QuadError,
    },
    #[error("vacuous instance: left-hand side {lhs} is within its error bound {err}")]
    Vacuous { lhs: f64, err: f64 },
    #[error(transparent)]
    Instance(#[from] InstanceError),
}
