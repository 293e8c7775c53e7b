use num_complex::Complex64;
use thiserror::Error;

use crate::Mode;

/// Errors raised by the numerical routines of this crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("coupling `{name}` must be positive and finite, got {value}")]
    InvalidCoupling { name: &'static str, value: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("operation requires {expected} couplings, got {found}")]
    ModeMismatch { expected: Mode, found: Mode },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("series denominator vanishes: lower parameter #{parameter} at order {order}")]
    DenominatorVanishes { parameter: usize, order: usize },

    #[error("degenerate parameters: {0}")]
    DegenerateParameters(String),

    #[error("difference operator is singular at x = {x}")]
    Singularity { x: Complex64 },

    #[error("expected {expected} sign changes, found {found}")]
    RootCount { expected: usize, found: usize },

    #[error("zero at {x} is not simple (|p'| = {derivative:e}, scale {scale:e})")]
    NotSimple { x: f64, derivative: f64, scale: f64 },

    #[error("upper search bound exceeded {bound} without locating all zeros")]
    UnboundedSearch { bound: f64 },

    #[error("configuration leaves the chamber: {0}")]
    ChamberViolation(String),

    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("Gram matrix is numerically singular (condition estimate {condition:e})")]
    QuadratureFailure { condition: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
