use alloc::vec::Vec;

use crate::params::Param;

/// Errors raised by the numerical core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("{name} = {value} is outside its domain {domain}")]
    Domain {
        name: &'static str,
        value: f64,
        domain: &'static str,
    },

    #[error("{0}")]
    InvalidArgument(&'static str),

    #[error("non-finite derivative of p({m},{n}) with respect to {param}")]
    NonFiniteDerivative { param: Param, m: usize, n: usize },

    /// `m == usize::MAX` marks the aggregated overflow outcome.
    #[error("bin ({m},{n}) holds {count} counts but the model assigns probability {probability:e}")]
    UnexplainedBin {
        m: usize,
        n: usize,
        count: u64,
        probability: f64,
    },

    #[error("matrix is singular (condition {condition:e}); null direction {direction:?}")]
    Singular { condition: f64, direction: Vec<f64> },

    #[error("histogram is empty")]
    EmptyHistogram,

    #[error("grid shapes differ: {left:?} vs {right:?}")]
    ShapeMismatch {
        left: (usize, usize),
        right: (usize, usize),
    },

    #[error("cannot draw {requested} shots without replacement from {available}")]
    ResampleTooLarge { requested: u64, available: u64 },
}

pub type Result<T, E = Error> = core::result::Result<T, E>;
