use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the design-exploration engine.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid design parameters: {0}")]
    InvalidParams(String),

    #[error("no foreground pixels in image")]
    NoForeground,

    #[error("empty mask")]
    EmptyMask,

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error("cold start: labeled data must contain both classes")]
    ColdStart,

    #[error("model has no embedding for modality `{0}`")]
    MissingModality(String),

    #[error("unknown strategy `{0}`")]
    UnknownStrategy(String),

    #[error("unknown design id {0}")]
    UnknownDesign(u32),

    #[error("validation error: {0}")]
    Validation(String),

    #[error("session has ended")]
    SessionEnded,

    #[error("calibration failed for task {task}: {reason}")]
    Calibration { task: String, reason: String },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("image {}: {source}", path.display())]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
