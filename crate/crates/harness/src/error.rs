use std::path::PathBuf;
use thiserror::Error;

/// Failures of a harness run, split by exit code.
#[derive(Debug, Error)]
pub enum HarnessError {
    /// Schema or validation failure at a field path such as `ldp.rate.k`.
    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },
    #[error("{0}")]
    Runtime(#[from] flowlab_core::Error),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("csv error on {path}: {message}")]
    Csv { path: PathBuf, message: String },
}

impl HarnessError {
    pub fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        HarnessError::Config {
            path: path.into(),
            message: message.into(),
        }
    }

    /// `2` for configuration problems, `3` for everything raised while running.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config { .. } => 2,
            _ => 3,
        }
    }

    /// Structured payload printed on stderr.
    pub fn payload(&self) -> serde_json::Value {
        match self {
            HarnessError::Config { path, message } => serde_json::json!({
                "error": "config",
                "path": path,
                "message": message,
            }),
            HarnessError::Runtime(e) => serde_json::json!({
                "error": "runtime",
                "module_error": format!("{e:?}"),
                "message": e.to_string(),
            }),
            other => serde_json::json!({ "error": "io", "message": other.to_string() }),
        }
    }
}

pub type Result<T> = std::result::Result<T, HarnessError>;
