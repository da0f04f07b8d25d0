use thiserror::Error;

use crate::reconstruction::DegeneracyDiagnosis;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("singular conditioning block (det = {det:e})")]
    DegenerateBlock { det: f64 },

    #[error("solver precondition violated: {0:?}")]
    Degenerate(DegeneracyDiagnosis),

    #[error("inconsistent statistics: {0}")]
    InconsistentStatistics(String),

    #[error("contract violation: {0}")]
    ContractViolation(String),

    #[error("Fock truncation tail {tail:e} exceeds tolerance at cutoff {cutoff}")]
    TailTooLarge { tail: f64, cutoff: usize },

    #[error("conditioning probability {probability:e} below reliability floor")]
    UnreliableConditioning { probability: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
