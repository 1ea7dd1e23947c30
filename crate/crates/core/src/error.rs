use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error: {0}")]
    Io(#[from] io::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("empty label")]
    EmptyLabel,

    #[error("invalid schema for dataset `{dataset}`: {reason}")]
    InvalidSchema { dataset: String, reason: String },

    #[error("alias configuration error: {0}")]
    AliasConfig(String),

    #[error("schema has no labels to render")]
    EmptyOptions,

    #[error("no instruction template for task {0}")]
    MissingTemplate(String),

    #[error("task {task} cannot be compiled from `{dataset}`: {reason}")]
    IncompatibleTask {
        task: String,
        dataset: String,
        reason: String,
    },

    #[error("gold and prediction streams are misaligned: {0}")]
    Alignment(String),

    #[error("split error: {0}")]
    Split(String),

    #[error("inference configuration error: {0}")]
    Inference(String),
}
