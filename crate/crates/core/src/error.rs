use thiserror::Error;

/// Errors produced anywhere in the density-estimation pipeline.
#[derive(Error, Debug)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("configuration error: {0}")]
    Configuration(String),

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error("construction failed: {0}")]
    Construction(String),

    /// A flow trajectory left the finite numbers. `step` is the zero-based RK4 step.
    #[error("trajectory diverged at step {step}")]
    Divergence { step: usize },

    #[error("training aborted at epoch {epoch}, batch {batch}: {reason}")]
    TrainingAborted { epoch: usize, batch: usize, reason: String },

    #[error("fit failed: {message} (trace: {trace:?})")]
    Fit { message: String, trace: Vec<f64> },

    #[error("invalid config: {}", .0.join("; "))]
    Validation(Vec<String>),

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("report error for {manifest}: {message}")]
    Report { manifest: String, message: String },

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    /// Wraps an error with the name of the pipeline stage it came from.
    pub fn in_stage(self, stage: &'static str) -> Error {
        Error::Stage { stage, source: Box::new(self) }
    }

    /// True for errors caused by bad user input rather than a runtime failure.
    pub fn is_validation(&self) -> bool {
        match self {
            Error::Validation(_) => true,
            Error::Stage { source, .. } => source.is_validation(),
            _ => false,
        }
    }
}
