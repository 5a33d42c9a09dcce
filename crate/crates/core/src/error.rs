use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid dimension {0}: must be at least 1")]
    InvalidDimension(usize),

    #[error("invalid exponent {name} = {value}: {reason}")]
    InvalidExponent { name: &'static str, value: f64, reason: &'static str },

    #[error("negative value {value} at {point}")]
    NegativeValue { point: String, value: f64 },

    #[error("position {position} (doubled) does not match the line parity")]
    ParityMismatch { position: i64 },

    #[error("support point {point} lies outside the box of radius {radius}")]
    SupportOutsideBox { point: String, radius: i64 },

    #[error("Schwarz iteration did not reach a fixed point after {sweeps} sweeps ({changed} sites still moving)")]
    NonConvergence {
        sweeps: usize,
        changed: usize,
        /// Dense values (box order) of the last two sweep outputs.
        last_two: Box<(Vec<f64>, Vec<f64>)>,
    },

    #[error("infeasible balance condition: 1/q* = {reciprocal} is not positive")]
    InfeasibleBalance { reciprocal: f64 },

    #[error("invalid parameters: {}", .0.join("; "))]
    InvalidParams(Vec<String>),

    #[error("Subcritical: q = {q} < q* = {q_star}")]
    Subcritical { q: f64, q_star: f64 },

    #[error("function is identically zero")]
    ZeroFunction,

    #[error("step stalled: no decrease down to step {step:e}")]
    StepStall { step: f64 },

    #[error("invariant violated: {0}")]
    InvariantViolation(String),

    #[error("degenerate scaling: q = p")]
    ScalingDegenerate,

    #[error("degenerate theta = {theta}: multiplier {which} is not defined")]
    DegenerateTheta { theta: f64, which: &'static str },

    #[error("minimization did not converge on the final box")]
    NotConverged,

    #[error("box radius {radius} too small: need at least {required}")]
    BoxTooSmall { radius: i64, required: i64 },

    #[error("insufficient samples: {0}")]
    InsufficientSamples(String),

    #[error("point lies outside the unit cell")]
    OutsideCell,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("DuplicateOrZero: entry {index}: {reason}")]
    DuplicateOrZero { index: usize, reason: String },

    #[error("parse error: {0}")]
    Parse(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
