use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Core(#[from] scale_core::Error),

    #[error("dataset, line {line}: {message}")]
    DatasetParse { line: usize, message: String },

    #[error("config: {0}")]
    Config(String),

    #[error("run failed: {failed} of {total} segments errored")]
    RunFailed { failed: usize, total: usize },

    #[error(transparent)]
    Mock(#[from] scale_mock::MockError),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = HarnessError> = std::result::Result<T, E>;
