use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument fell outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// An iterative routine failed to reach its tolerance within the
    /// iteration cap. Signals a numerical pathology, not bad input.
    #[error("convergence failure: {0}")]
    Convergence(String),

    /// A design-matrix column was (numerically) inside the span of the
    /// columns before it, violating the full-column-rank assumption.
    #[error("rank deficiency: column {col} lies in the span of the preceding columns")]
    RankDeficient { col: usize },

    /// The normal equations of the explicit projection oracle were singular.
    #[error("singular normal equations for leading {k} columns")]
    SingularSystem { k: usize },

    /// An information criterion was evaluated on an exact fit, where the
    /// log-likelihood term is undefined.
    #[error("degenerate fit: residual variance at order {k} is zero")]
    DegenerateFit { k: usize },

    /// The adaptive upper bracket of the design-penalty calibration could
    /// not be established; usually means too few Monte Carlo trials.
    #[error("calibration bracket failure: {0}")]
    BracketFailure(String),

    /// An experiment specification violated its invariants.
    #[error("invalid experiment spec: {0}")]
    InvalidSpec(String),
}

pub type Result<T> = std::result::Result<T, Error>;
