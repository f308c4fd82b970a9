// SPDX-License-Identifier: Apache-2.0

use std::path::PathBuf;

/// Errors produced by the lexstrata library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("form {0:?} is empty after cleaning")]
    EmptyForm(String),

    #[error("missing required column {column:?} in {source_name}")]
    MissingColumn { column: String, source_name: String },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("unknown language {0:?} (not present in the training context)")]
    UnknownLanguage(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("both classes must be present: {0}")]
    SingleClass(String),

    #[error("non-finite value in feature {feature:?} at row {row}")]
    NonFinite { feature: String, row: usize },

    #[error("feature columns do not match the model: {0}")]
    ColumnMismatch(String),

    #[error("model has no node covers; retrain with cover tracking enabled")]
    MissingCovers,

    #[error("statistic undefined: {0}")]
    Undefined(String),

    #[error("missing upstream artifact {artifact:?}; run `lexstrata {subcommand}` first")]
    MissingArtifact { artifact: String, subcommand: String },
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
