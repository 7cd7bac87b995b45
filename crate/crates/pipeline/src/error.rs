use qgdebias_core::nets::NetError;
use qgdebias_core::nudging::NudgeError;
use qgdebias_core::spectral_qg::QgError;
use qgdebias_core::stats::StatsError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("{0}")]
    Usage(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("missing prerequisite: {0}")]
    Missing(String),
    #[error("{0}")]
    Other(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl PipelineError {
    /// 0 success, 1 usage (also configuration and I/O), 2 numerical failure,
    /// 3 missing prerequisite.
    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Numerical(_) => 2,
            Self::Missing(_) => 3,
            _ => 1,
        }
    }
}

impl From<QgError> for PipelineError {
    fn from(e: QgError) -> Self {
        match e {
            QgError::BlowUp { .. } | QgError::Cfl { .. } | QgError::DegenerateInversion => Self::Numerical(e.to_string()),
            QgError::Io(io) => Self::Io(io),
            QgError::InvalidGrid(_) | QgError::InvalidParams(_) | QgError::InvalidStep(_) | QgError::SamplingMismatch { .. } => {
                Self::Config(e.to_string())
            }
            _ => Self::Other(e.to_string()),
        }
    }
}

impl From<NudgeError> for PipelineError {
    fn from(e: NudgeError) -> Self {
        match e {
            NudgeError::Solver(q) => q.into(),
            NudgeError::Io(io) => Self::Io(io),
            NudgeError::InvalidTau(_) | NudgeError::UnderResolvedReference { .. } | NudgeError::CoarserThanSource { .. } => {
                Self::Config(e.to_string())
            }
            NudgeError::ZeroVariance { .. } => Self::Numerical(e.to_string()),
            _ => Self::Other(e.to_string()),
        }
    }
}

impl From<NetError> for PipelineError {
    fn from(e: NetError) -> Self {
        match e {
            NetError::Diverged { .. } | NetError::NonPositiveSigma(_) => Self::Numerical(e.to_string()),
            NetError::Config(_) => Self::Config(e.to_string()),
            NetError::Io(io) => Self::Io(io),
            _ => Self::Other(e.to_string()),
        }
    }
}

impl From<StatsError> for PipelineError {
    fn from(e: StatsError) -> Self {
        match e {
            StatsError::Degenerate(_) => Self::Numerical(e.to_string()),
            _ => Self::Other(e.to_string()),
        }
    }
}
