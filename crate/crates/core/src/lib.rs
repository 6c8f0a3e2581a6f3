//! Omniprediction toolkit for single-index models.
//!
//! The numeric kernel (link functions, PAV, bounded isotonic regression and
//! its maintainer data structures) is generic over the scalar type via
//! [`Scalar`]; the learner, evaluation, and data layers instantiate `f64`
//! through the aliases at the crate root.

// negated float comparisons double as NaN guards in validation paths
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive, ToPrimitive};

pub mod bir;
pub mod data;
pub mod evalgap;
pub mod learners;
pub mod links;
pub mod maintainer;
pub mod pav;
pub mod rng;
pub mod segtree;

#[cfg(test)]
pub(crate) mod testutil;

/// Floating-point scalar the numeric kernel is generic over.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Debug + Display + Default + Send + Sync + 'static
{
}

impl<T> Scalar for T where
    T: Float + FromPrimitive + ToPrimitive + Debug + Display + Default + Send + Sync + 'static
{
}

/// Shorthand for pulling an `f64` literal into a generic scalar.
pub(crate) fn cast<F: Scalar>(x: f64) -> F {
    F::from_f64(x).expect("f64 literal representable in scalar type")
}

/// Errors shared across the crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("malformed link: {0}")]
    MalformedLink(String),
    #[error("smoothing parameter {alpha} outside [0, 1/(2*LR)) for LR={lr}")]
    AlphaOutOfRange { alpha: f64, lr: f64 },
    #[error("empty input: {0}")]
    EmptyInput(&'static str),
    #[error("index {index} out of bounds for size {size}")]
    IndexOutOfBounds { index: usize, size: usize },
    #[error("quadratic coefficient {alpha} is not 0 or 1/(2m) for an integer m in [1, {max_m}]")]
    InvalidPieceCoefficient { alpha: f64, max_m: u64 },
    #[error("infeasible instance: no vector in [0,1] satisfies the gap constraints (first conflict at position {position})")]
    Infeasible { position: usize },
    #[error("malformed instance: {0}")]
    MalformedInstance(String),
    #[error("reference solver did not converge within {0} iterations")]
    NoConvergence(usize),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("gradient stream exhausted: needed {needed} samples, got {got}")]
    StreamExhausted { needed: usize, got: usize },
    #[error("length mismatch: {0}")]
    LengthMismatch(String),
    #[error("grid resolution {0} outside (0, 1)")]
    GridResolution(f64),
    #[error("unknown generator preset '{0}'")]
    UnknownPreset(String),
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("internal numerical failure: {0}")]
    Internal(String),
}

pub type Result<T> = std::result::Result<T, Error>;

/// Double-precision instantiations used by the learner and evaluation layers.
pub type Link = links::PiecewiseLinearLink<f64>;
pub type Step = pav::StepPredictor<f64>;
pub type BirInstance = bir::Instance<f64>;
pub type BirSolution = bir::Solution<f64>;

pub use data::Dataset;
pub use learners::{MultiIndexModel, TrainConfig};
