use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("source unavailable: {path}: {reason}")]
    SourceUnavailable { path: PathBuf, reason: String },

    #[error("parse error in {file}:{line}: {message}")]
    Parse {
        file: PathBuf,
        line: usize,
        message: String,
    },

    #[error("no records in {0}")]
    NoRecords(PathBuf),

    #[error("taxonomy integrity violated: cycle {}", .cycle.join(" -> "))]
    TaxonomyIntegrity { cycle: Vec<String> },

    #[error("invalid taxonomy: {0}")]
    InvalidTaxonomy(String),

    #[error("empty dataset: {0}")]
    EmptyDataset(String),

    #[error("capacity exceeded: requested {requested}, at most {max} available")]
    Capacity { requested: usize, max: usize },

    #[error("no template catalog for task {task}, source {source_id}, family {family}")]
    CatalogMissing {
        task: String,
        source_id: String,
        family: String,
    },

    #[error("template {template_id} cannot be rendered: unsubstitutable placeholders {}", .placeholders.join(", "))]
    Render {
        template_id: String,
        placeholders: Vec<String>,
    },

    #[error("invalid template data: {0}")]
    TemplateData(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("backend returned HTTP {status}: {body}")]
    Backend { status: u16, body: String },

    #[error("backend request failed: {0}")]
    Transport(String),

    #[error("backend request timed out after {attempts} attempt(s)")]
    Timeout { attempts: usize },

    #[error("integrity error: {0}")]
    Integrity(String),

    #[error("coverage gap for template {template_id}: {} missing item(s): {}", .missing.len(), .missing.join(", "))]
    Coverage {
        template_id: String,
        missing: Vec<String>,
    },

    #[error("not found: {0}")]
    NotFound(String),

    #[error("output directory is locked by another run: {0}")]
    Locked(PathBuf),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn parse(file: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            file: file.into(),
            line,
            message: message.into(),
        }
    }

    /// Configuration problems as opposed to bad data; the CLI maps these to
    /// exit code 2.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::Config(_) | Error::CatalogMissing { .. } | Error::TemplateData(_)
        )
    }
}
