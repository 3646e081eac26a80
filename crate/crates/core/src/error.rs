use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Vector or matrix sizes that do not line up.
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    Dimension {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    /// A structurally invalid network or layer.
    #[error("invalid structure: {0}")]
    Structure(String),

    /// A value outside its allowed domain (inputs, labels, schema ranges).
    #[error("invalid input: {0}")]
    Input(String),

    #[error("{path}:{line}: field `{field}`: {message}")]
    Parse {
        path: String,
        line: usize,
        field: String,
        message: String,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("calibration diverged at iteration {iteration}: loss is {value}")]
    Diverged { iteration: usize, value: f64 },

    #[error("solver failure: {0}")]
    Solver(String),

    #[error("solver hit its limit ({reason}); best bounds so far [{lower}, {upper}]")]
    SolverLimit { reason: String, lower: f64, upper: f64 },

    #[error("repair program is infeasible within the delta box (|delta| <= {delta_max}); try a larger --delta-max")]
    RepairInfeasible { delta_max: f64 },

    #[error("repaired model failed certification on {failing} of {total} repair inputs")]
    CertificationFailed { failing: usize, total: usize },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn dim(context: &'static str, expected: usize, actual: usize) -> Self {
        Error::Dimension {
            context,
            expected,
            actual,
        }
    }
}
