//! # igc-core
//!
//! Nonparametric information geometry at desk scale.
//!
//! Densities live on a [`Measure`]: either a finite weighted support (reals or
//! boolean configurations in `{+1,-1}^n`) or a 1-D quadrature grid. On top of
//! that the crate provides
//!
//! | Module | Contents |
//! |--------|----------|
//! | [`measure`] | measures, densities, random variables, expectations |
//! | [`special`] | incomplete gamma at `-1/2`, the integral `C(theta, a)` |
//! | [`orlicz`] | Young functions, Luxemburg and dual norms, Walsh spectra, steepness |
//! | [`exp_manifold`] | exponential and mixture charts, cumulant functional, transports, divergence |
//! | [`hilbert`] | square-root embedding, sphere transport, Hilbert-bundle transport, metric derivative |
//! | [`flows`] | chart-based ODE integration, geodesics, natural-gradient ascent, heat flow |
//! | [`deformed`] | deformed logarithms, phi-norms, escort expectations, phi-arcs and phi-cumulants |
//!
//! All values are immutable after construction and every operation is a pure
//! function of its inputs.

use thiserror::Error;

pub mod deformed;
pub mod exp_manifold;
pub mod flows;
pub mod hilbert;
pub mod measure;
pub mod orlicz;
pub mod quadrature;
pub mod random;
pub mod special;

pub use measure::{
    covariance, expect, CotangentVector, Density, HilbertVector, Measure, MeasureKind, Points, QuadratureRule,
    RandomVariable, TangentVector,
};

/// Errors raised by igc-core operations.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("operands live on different base measures")]
    BaseMismatch,

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("value at index {index} must be strictly positive, got {value}")]
    NonPositive { index: usize, value: f64 },

    #[error("non-finite value at index {index}")]
    NonFinite { index: usize },

    #[error("total mass {mass} differs from 1 by more than {tol}")]
    NotNormalized { mass: f64, tol: f64 },

    #[error("random variable is not centered: mean {mean}")]
    NotCentered { mean: f64 },

    #[error("invalid measure: {0}")]
    InvalidMeasure(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("operation requires a boolean base measure")]
    NotBoolean,

    #[error("support of size {size} exceeds the enumeration limit {max}")]
    SupportTooLarge { size: usize, max: usize },

    #[error("no finite bracket found: {0}")]
    NoBracket(String),

    #[error("divergent quantity: {0}")]
    Divergent(String),

    #[error("points are antipodal or outside the chart domain: {0}")]
    ChartDomain(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("stability condition violated: {0}")]
    Stability(String),

    #[error("quadrature underresolved: {0}")]
    Underresolved(String),
}

pub type Result<T> = std::result::Result<T, Error>;
