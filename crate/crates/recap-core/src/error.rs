//! Error type shared across the crate.
//!
//! The CLI maps validation failures (bad configs, malformed manifests,
//! impossible shapes) to exit code 1 and everything that goes wrong after
//! validation (I/O, numerical breakdown) to exit code 2, so every variant
//! knows which side of that line it falls on.

use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Tensor shape disagreement. Always names both shapes.
    #[error("shape mismatch: {context}: {lhs:?} vs {rhs:?}")]
    Shape {
        context: String,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },

    /// A structurally invalid argument (empty batch, zero extent, bad axis).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Configuration rejected before any compute. Collects every offending
    /// key so a single run reports all problems at once.
    #[error("invalid configuration:{}", problems.iter().map(|p| format!("\n  - {p}")).collect::<String>())]
    Config { problems: Vec<String> },

    /// Dataset manifest rejected (duplicate paths, unknown labels, missing
    /// files).
    #[error("manifest: {0}")]
    Manifest(String),

    /// Checkpoint could not be decoded or does not match the expected model
    /// configuration.
    #[error("checkpoint: {0}")]
    Checkpoint(String),

    /// Filesystem failure, tagged with the path involved.
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Image decode/encode failure, tagged with the path involved.
    #[error("{}: {message}", path.display())]
    Image { path: PathBuf, message: String },

    /// Anything that fails mid-computation after inputs validated.
    #[error("runtime: {0}")]
    Runtime(String),
}

impl Error {
    /// Shorthand for a [`Error::Shape`] with context.
    pub fn shape(context: impl Into<String>, lhs: &[usize], rhs: &[usize]) -> Self {
        Error::Shape {
            context: context.into(),
            lhs: lhs.to_vec(),
            rhs: rhs.to_vec(),
        }
    }

    /// Shorthand for a single-problem [`Error::Config`].
    pub fn config(problem: impl Into<String>) -> Self {
        Error::Config {
            problems: vec![problem.into()],
        }
    }

    /// Wraps an I/O error with the path it concerned.
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors a user can fix by editing inputs; these exit with
    /// code 1 rather than 2.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Shape { .. }
                | Error::InvalidInput(_)
                | Error::Config { .. }
                | Error::Manifest(_)
                | Error::Checkpoint(_)
        )
    }
}
