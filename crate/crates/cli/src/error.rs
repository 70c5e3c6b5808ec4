use thiserror::Error;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("config error: {0}")]
    Config(String),

    #[error("every grid cell diverged or failed for {method} on scenario {scenario}")]
    AllCellsDiverged { scenario: String, method: String },

    #[error(transparent)]
    Core(#[from] redbp_core::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = ExperimentError> = std::result::Result<T, E>;
