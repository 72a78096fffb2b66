use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    #[error("system is not controllable (controllability rank {rank} < {dim})")]
    NotControllable { rank: usize, dim: usize },

    #[error("dimension too large for exhaustive search: d*n = {0} > 4")]
    DimensionTooLarge(usize),

    #[error("filter index {index} out of range (h = {h})")]
    FilterIndex { index: usize, h: usize },

    #[error("cost evaluation failed: {0}")]
    CostEvaluation(String),

    #[error("step {step}: {source}")]
    AtStep {
        step: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("run failed for controller `{controller}` seed {seed}: {source}")]
    Run {
        controller: String,
        seed: u64,
        #[source]
        source: Box<Error>,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn at_step(self, step: usize) -> Self {
        Error::AtStep {
            step,
            source: Box::new(self),
        }
    }

    /// True when the root cause is a numerical failure (CLI exit code 3).
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::NumericalFailure(_) | Error::NotControllable { .. } => true,
            Error::AtStep { source, .. } | Error::Run { source, .. } => source.is_numerical(),
            _ => false,
        }
    }

    /// True when the root cause is a configuration problem (CLI exit code 2).
    pub fn is_config(&self) -> bool {
        match self {
            Error::Config(_) | Error::Json(_) | Error::InvalidArgument(_) => true,
            Error::DimensionMismatch { .. } | Error::DimensionTooLarge(_) => true,
            Error::AtStep { source, .. } | Error::Run { source, .. } => source.is_config(),
            _ => false,
        }
    }
}

pub(crate) fn check_dim(context: &'static str, expected: usize, actual: usize) -> Result<()> {
    if expected != actual {
        return Err(Error::DimensionMismatch {
            context,
            expected,
            actual,
        });
    }
    Ok(())
}
