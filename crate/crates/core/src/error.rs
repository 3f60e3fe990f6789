use std::path::PathBuf;

/// Errors produced anywhere in the pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{}line {line}: {message}", path_prefix(.path))]
    Parse {
        path: Option<PathBuf>,
        line: usize,
        message: String,
    },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("insufficient data: class `{class}` has {available} examples, {required} required")]
    InsufficientData {
        class: String,
        available: usize,
        required: usize,
    },

    #[error("type error: {0}")]
    Type(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    #[error("selection error: {0}")]
    Selection(String),

    #[error("unsupported mode: {0}")]
    UnsupportedMode(String),

    #[error("coverage error: {0}")]
    Coverage(String),

    #[error("generator error: {0}")]
    Generator(String),

    #[error("snapshot error: {0}")]
    Snapshot(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

fn path_prefix(path: &Option<PathBuf>) -> String {
    match path {
        Some(p) => format!("{}: ", p.display()),
        None => String::new(),
    }
}

impl Error {
    /// Short stable identifier used in machine-readable error reports.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Parse { .. } => "parse",
            Error::Validation(_) => "validation",
            Error::InsufficientData { .. } => "insufficient_data",
            Error::Type(_) => "type",
            Error::Config(_) => "config",
            Error::Numeric(_) => "numeric",
            Error::UndefinedMetric(_) => "undefined_metric",
            Error::Selection(_) => "selection",
            Error::UnsupportedMode(_) => "unsupported_mode",
            Error::Coverage(_) => "coverage",
            Error::Generator(_) => "generator",
            Error::Snapshot(_) => "snapshot",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
