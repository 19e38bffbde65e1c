use std::io;

use thiserror::Error;

/// Errors produced by the solver library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("wrong system: {0}")]
    WrongSystem(String),

    #[error("forcing impossible: {0}")]
    ForcingImpossible(String),

    #[error("non-finite value in stage {stage}")]
    NonFiniteState { stage: usize },

    #[error("AB2 needs the previous right-hand side; bootstrap with a one-step method first")]
    BootstrapRequired,

    #[error("order conditions are only tabulated up to order 5, got {0}")]
    UnsupportedOrder(usize),

    #[error("scale vector contains a non-positive entry")]
    InvalidScale,

    #[error("step size underflow: proposed h = {h_new:e} below h_min = {h_min:e}")]
    StepSizeUnderflow { h_new: f64, h_min: f64 },

    #[error("interpolation point t = {t} outside reference range [{lo}, {hi}]")]
    OutOfRange { t: f64, lo: f64, hi: f64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("checkpoint format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    /// Short machine-readable category, used by the CLI for exit reporting.
    pub fn category(&self) -> &'static str {
        match self {
            Error::InvalidGrid(_) | Error::Config(_) => "config",
            Error::ShapeMismatch(_) | Error::WrongSystem(_) | Error::UnsupportedOrder(_) => "usage",
            Error::ForcingImpossible(_)
            | Error::NonFiniteState { .. }
            | Error::BootstrapRequired
            | Error::InvalidScale
            | Error::StepSizeUnderflow { .. }
            | Error::OutOfRange { .. } => "numerical",
            Error::Format(_) => "format",
            Error::Io(_) => "io",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
