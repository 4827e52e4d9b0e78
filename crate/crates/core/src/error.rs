use std::path::PathBuf;

/// Errors produced by the library and the command-line front end.
#[derive(thiserror::Error, Debug)]
pub enum Error {
    /// Invalid parameters or mismatched shapes.
    #[error("configuration error: {0}")]
    Config(String),

    /// Input data outside the domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Reverse-time diffusion diverged.
    #[error("numerical blowup at step {step}{}: {detail}", iteration.map(|i| format!(" of iteration {i}")).unwrap_or_default())]
    Blowup {
        step: usize,
        iteration: Option<usize>,
        detail: String,
    },

    #[error("I/O error on {path}: {message}")]
    Io { path: PathBuf, message: String },
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, message: impl ToString) -> Self {
        Error::Io {
            path: path.into(),
            message: message.to_string(),
        }
    }

    /// Attach the outer-loop iteration index to a blowup error.
    pub fn in_iteration(self, index: usize) -> Self {
        match self {
            Error::Blowup { step, detail, .. } => Error::Blowup {
                step,
                iteration: Some(index),
                detail,
            },
            other => other,
        }
    }

    /// Process exit code used by the CLI.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Domain(_) => 2,
            Error::Blowup { .. } => 3,
            Error::Io { .. } => 4,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
