use std::path::PathBuf;

/// Errors produced by every layer of the toolkit.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A spec or config value violates its documented constraints.
    #[error("configuration error: {0}")]
    Config(String),

    /// Array shapes disagree with the network or dataset.
    #[error("shape error: {0}")]
    Shape(String),

    /// A function argument is outside its domain.
    #[error("argument error: {0}")]
    Argument(String),

    /// A result would overflow the floating-point range.
    #[error("range error: {0}")]
    Range(String),

    /// Training produced a non-finite loss or parameter. `at` holds
    /// `(epoch, batch)` once the training loop has tagged the failure.
    #[error("numeric divergence{}: {detail}", fmt_position(*.at))]
    Divergence {
        at: Option<(usize, usize)>,
        detail: String,
    },

    /// An input file does not follow its declared format.
    #[error("format error in {}: {detail}", path.display())]
    Format { path: PathBuf, detail: String },

    #[error("i/o error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

fn fmt_position(at: Option<(usize, usize)>) -> String {
    match at {
        Some((epoch, batch)) => format!(" at epoch {epoch}, batch {batch}"),
        None => String::new(),
    }
}

impl Error {
    /// Attaches the training position to a divergence error; other variants pass through.
    pub fn at_step(self, epoch: usize, batch: usize) -> Self {
        match self {
            Error::Divergence { detail, .. } => Error::Divergence {
                at: Some((epoch, batch)),
                detail,
            },
            other => other,
        }
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }

    pub(crate) fn argument(msg: impl Into<String>) -> Self {
        Error::Argument(msg.into())
    }

    pub(crate) fn format(path: impl Into<PathBuf>, detail: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            detail: detail.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
