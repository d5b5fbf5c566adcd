use thiserror::Error;

/// Errors raised by the bound computations and the models feeding them.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("decoy ordering violated: require signal mean {signal} > decoy mean {decoy} > 0")]
    InvalidPair { signal: f64, decoy: f64 },

    #[error("ratio P(i|decoy)/P(i|signal) diverges at i = {photons}")]
    DivergentRatio { photons: usize },

    #[error("decoy ratio still rising at truncation index {index}; alpha cannot be certified")]
    TruncationUnsound { index: usize },

    #[error("zero denominator: {0}")]
    ZeroDenominator(&'static str),

    #[error("admissibility condition violated: {0}")]
    ConditionViolated(&'static str),

    #[error("degenerate bound: {0}")]
    DegenerateBound(&'static str),

    #[error("phase-error ratio {0} outside [0, 1]")]
    InvalidRatio(f64),

    #[error("no detections possible; Z-basis target unreachable")]
    UnreachableTarget,
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
