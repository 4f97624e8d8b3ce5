use thiserror::Error;

/// Errors produced anywhere in the simulator, trainer, or harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: `{field}`: {reason}")]
    Config { field: String, reason: String },

    #[error("topology error: {0}")]
    Topology(String),

    #[error("no satellite visible from the ground station at t = {t} s")]
    Visibility { t: f64 },

    #[error("routing error: {0}")]
    Routing(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid action: {0}")]
    Action(String),

    #[error("graph error: {0}")]
    Graph(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid state: {0}")]
    State(String),

    #[error("training error: {0}")]
    Training(String),

    #[error("missing or unreadable input: {0}")]
    Input(String),

    #[error("unsupported reconfiguration: {0}")]
    Unsupported(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            reason: reason.into(),
        }
    }

    /// Process exit code for the CLI, grouped by category.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config { .. } => 2,
            Error::Io(_) | Error::Json(_) | Error::Csv(_) | Error::Input(_) => 3,
            Error::Training(_) | Error::State(_) | Error::Unsupported(_) => 4,
            Error::Topology(_) | Error::Visibility { .. } | Error::Routing(_) => 5,
            Error::Domain(_) | Error::Action(_) | Error::Graph(_) | Error::Dimension(_) => 6,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
