use thiserror::Error;

/// Errors produced anywhere in the laboratory.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum BrwError {
    #[error("left-tail mass {p_left} is not below 1")]
    MassOverflow { p_left: f64 },

    #[error("numerical failure in {what}: achieved error {achieved:e}")]
    Numeric { what: String, achieved: f64 },

    #[error("spine drift m = {m} is not positive; widen the right_mu range or lower ell_inf")]
    Drift { m: f64 },

    #[error("calibration failed: {0}")]
    Calibration(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("population cap {cap} exceeded at generation {generation} ({population} node-generations)")]
    Capacity {
        generation: usize,
        population: usize,
        cap: usize,
    },

    #[error("stopping line unfinished at depth cap {depth}: mass {mass:e} still below the level")]
    UnfinishedLine { depth: usize, mass: f64 },

    #[error("rejection sampler exhausted {rounds} rounds in {what}")]
    RejectionExhausted { what: &'static str, rounds: usize },

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("truncation budget unattainable: {0}")]
    Truncation(String),
}

impl BrwError {
    pub fn domain(msg: impl Into<String>) -> Self {
        BrwError::Domain(msg.into())
    }

    pub fn is_capacity(&self) -> bool {
        matches!(self, BrwError::Capacity { .. } | BrwError::UnfinishedLine { .. })
    }
}

pub type Result<T> = std::result::Result<T, BrwError>;
