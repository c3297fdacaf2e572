use thiserror::Error;

/// Errors produced by ensemble construction, simulation and analysis.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("no parallel-edge-free permutation found for edge type {edge_type} after {retries} retries")]
    LiftFailed { edge_type: usize, retries: usize },

    #[error("variables with identical check sets remain after {rounds} repair rounds")]
    TwinRepairFailed { rounds: usize },

    #[error("graph was fully decoded; there is no stopping set")]
    FullyDecoded,

    #[error("no degree-one check nodes remain")]
    Deg1Exhausted,

    #[error("integration failure at tau={tau}: {reason}")]
    Integration { tau: f64, reason: String },

    #[error("threshold bracket [{lo}, {hi}] does not straddle survival and failure")]
    NotBracketed { lo: f64, hi: f64 },

    #[error("no steady-state plateau: {0}")]
    NoPlateau(String),

    #[error("poor fit: {0}")]
    PoorFit(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("root finding failed: {0}")]
    RootNotBracketed(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for errors caused by bad inputs rather than numerical trouble.
    pub fn is_config_error(&self) -> bool {
        matches!(self, Error::InvalidParameter(_) | Error::Parse(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
