use thiserror::Error;

/// Errors produced by model construction, bound computation and sampling.
#[derive(Debug, Error)]
pub enum Error {
    /// Declared model metadata failed verification (branch flags, partitions, P1/P2).
    #[error("model error: {0}")]
    Model(String),

    /// Evaluation requested outside the declared support.
    #[error("domain error: x = {x} outside support {support}")]
    Domain { x: f64, support: String },

    /// A numeric routine failed to converge or produced a non-finite value.
    #[error("numeric error: {0}")]
    Numeric(String),

    /// Interval degenerated: every simple estimate is an infinite sentinel.
    #[error("degenerate interval: no finite simple estimate in region {region}")]
    DegenerateInterval { region: usize },

    /// Invalid parameter value.
    #[error("parameter error: {0}")]
    Parameter(String),

    /// A caller-side contract was not met.
    #[error("contract violation: {0}")]
    Contract(String),

    /// The piecewise-exponential envelope has a non-integrable tail.
    #[error("improper envelope: non-integrable {side} tail (slope {slope})")]
    ImproperEnvelope { side: Tail, slope: f64 },

    /// The supplied likelihood bound was exceeded by an observed ratio.
    #[error("bound violation at x = {x}: likelihood ratio {ratio} > 1")]
    BoundViolation { x: f64, ratio: f64 },

    /// The adaptive envelope failed to dominate the target at a proposal.
    #[error("envelope violation at x = {x}: acceptance ratio {ratio} > 1")]
    EnvelopeViolation { x: f64, ratio: f64 },
}

/// Which infinite tail of an envelope failed to integrate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Tail {
    Left,
    Right,
}

impl std::fmt::Display for Tail {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Tail::Left => write!(f, "left"),
            Tail::Right => write!(f, "right"),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
