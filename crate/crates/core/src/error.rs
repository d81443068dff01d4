use std::path::PathBuf;

use thiserror::Error;

/// One iteration of the interior-point solver, kept for error reports.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationTrace {
    pub iteration: usize,
    pub gap: f64,
    pub primal_step: f64,
    pub dual_step: f64,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("data error: {0}")]
    Data(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("usage error: {0}")]
    Usage(String),
    #[error("singular design: {0}")]
    SingularDesign(String),
    #[error("solver did not converge after {} iterations (last gap {:.3e})", .trace.len(), .trace.last().map(|t| t.gap).unwrap_or(f64::NAN))]
    Solver { trace: Vec<IterationTrace> },
    #[error("inference error: {0}")]
    Inference(String),
    #[error("internal error: {0}")]
    Internal(String),
    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Wraps an error with the pipeline stage it came from.
    pub fn in_stage(self, stage: &'static str) -> Self {
        match self {
            e @ Error::Stage { .. } => e,
            e => Error::Stage {
                stage,
                source: Box::new(e),
            },
        }
    }
}
