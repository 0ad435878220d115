use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the reconstruction toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid grid: {0}")]
    Grid(String),

    /// Distance transform of a mask with no set voxels.
    #[error("mask has no set voxels; every distance is infinite")]
    AllFar,

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("infeasible constraints: {0}")]
    Infeasible(String),

    #[error("solver diverged at iteration {iter}: {detail}")]
    Divergence { iter: usize, detail: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("non-manifold mesh: {} offending edge(s), first {:?}", edges.len(), edges.first())]
    NonManifold { edges: Vec<(usize, usize)> },

    #[error("{}: {field}: {detail}", path.display())]
    Format {
        path: PathBuf,
        field: String,
        detail: String,
    },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(
        path: impl Into<PathBuf>,
        field: impl Into<String>,
        detail: impl Into<String>,
    ) -> Self {
        Error::Format {
            path: path.into(),
            field: field.into(),
            detail: detail.into(),
        }
    }

    /// True for errors caused by the numerics rather than by the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::Divergence { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;
