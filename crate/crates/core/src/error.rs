use thiserror::Error;

use crate::gf2::BitVector;

#[derive(Debug, Error)]
pub enum Error {
    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("probability {0} is outside [0, 1]")]
    ProbabilityOutOfRange(String),

    #[error("bias {0} is outside the admissible range {1}")]
    BiasOutOfRange(String, &'static str),

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("index {index} out of range 1..={max}")]
    IndexOutOfRange { index: usize, max: usize },

    #[error("conditioning on zero-mass prefix {prefix} at coordinate {index}")]
    ZeroMassPrefix { index: usize, prefix: BitVector },

    #[error(
        "distribution is not {delta}-Santha-Vazirani: Pr[Z_{index}=1 | Z_<{index}={prefix}] = {conditional} \
         (bias {bias})"
    )]
    NotSantaVazirani {
        delta: String,
        index: usize,
        prefix: BitVector,
        conditional: String,
        bias: String,
    },

    #[error("bias function deviates from 1/2 by {deviation}, exceeding the bound {bound}")]
    BiasFunctionOutOfRange { deviation: String, bound: String },

    #[error("internal error: constructed affine-coefficient table leaves the simplex at entry {0}")]
    SimplexViolation(usize),

    #[error("delta {delta} must lie in the open interval (0, {bound})")]
    DeltaOutOfRange { delta: String, bound: String },

    #[error("table size guard exceeded: {what} = {value} > {limit}")]
    SizeGuard {
        what: &'static str,
        value: usize,
        limit: usize,
    },

    #[error("too few samples for chi-square: smallest expected cell count {0} < 5")]
    TooFewSamples(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
