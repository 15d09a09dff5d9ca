use thiserror::Error;

use crate::observables::TrajectoryRecord;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parameter error: {0}")]
    Parameter(String),

    #[error("lookup error: {0}")]
    Lookup(String),

    #[error("shape error: {0}")]
    Shape(String),

    #[error("unsupported basis: {0}")]
    UnsupportedBasis(String),

    #[error("annihilation of vacuum at site {site}: resulting norm {norm:e}")]
    AnnihilationOfVacuum { site: usize, norm: f64 },

    #[error("flip of down spin at site {site}: resulting norm {norm:e}")]
    FlipOfDownSpin { site: usize, norm: f64 },

    /// Krylov step could not certify the fidelity threshold.
    #[error("accuracy error: fidelity-loss bound {infidelity_bound:e} (r^2 bound {r2_bound:e}) exceeds threshold {epsilon:e} at Krylov dimension {krylov_dim}")]
    Accuracy {
        infidelity_bound: f64,
        r2_bound: f64,
        epsilon: f64,
        krylov_dim: usize,
    },

    #[error("convergence error after {} sweeps (last energies: {energies:?})", energies.len())]
    Convergence { energies: Vec<f64> },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("tracking error: {0}")]
    Tracking(String),

    #[error("linear algebra failure: {0}")]
    LinAlg(String),

    #[error("checkpoint format error: {0}")]
    Checkpoint(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    /// A trajectory was aborted; the partial record is kept.
    #[error("trajectory incomplete at t = {time}: {source}")]
    Incomplete {
        time: f64,
        partial: Box<TrajectoryRecord>,
        source: Box<Error>,
    },
}

impl Error {
    /// Process exit code for the command line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io(_) | Error::Checkpoint(_) => 4,
            Error::Accuracy { .. } | Error::Convergence { .. } | Error::LinAlg(_) => 3,
            Error::Incomplete { source, .. } => source.exit_code(),
            _ => 2,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Error::Parameter(_) => "parameter",
            Error::Lookup(_) => "lookup",
            Error::Shape(_) => "shape",
            Error::UnsupportedBasis(_) => "unsupported-basis",
            Error::AnnihilationOfVacuum { .. } => "annihilation-of-vacuum",
            Error::FlipOfDownSpin { .. } => "flip-of-down-spin",
            Error::Accuracy { .. } => "accuracy",
            Error::Convergence { .. } => "convergence",
            Error::InsufficientData(_) => "insufficient-data",
            Error::Tracking(_) => "tracking",
            Error::LinAlg(_) => "linalg",
            Error::Checkpoint(_) => "checkpoint",
            Error::Config(_) => "config",
            Error::Io(_) => "io",
            Error::Incomplete { .. } => "incomplete",
        }
    }
}

impl From<ndarray_linalg::error::LinalgError> for Error {
    fn from(e: ndarray_linalg::error::LinalgError) -> Self {
        Error::LinAlg(e.to_string())
    }
}

pub(crate) fn param<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Parameter(msg.into()))
}
