use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("rank deficiency at column {column} (diagonal {diag:.3e}, scale {scale:.3e})")]
    RankDeficient { column: usize, diag: f64, scale: f64 },

    #[error("singular triangular system: |R[{index},{index}]| = {value:.3e}")]
    Singular { index: usize, value: f64 },

    #[error("degenerate atom: column {column} has norm {norm:.3e}")]
    DegenerateAtom { column: usize, norm: f64 },

    #[error("dictionary needs at least {needed} atoms, found {found}")]
    InsufficientAtoms { needed: usize, found: usize },

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("every atom is already selected")]
    ExhaustedDictionary,

    #[error("residual is zero; the solver should have halted")]
    ZeroResidual,

    #[error("degenerate residual: {0}")]
    DegenerateResidual(String),

    #[error("instance too large for exhaustive enumeration: {subsets} subsets exceed limit {limit}")]
    InstanceTooLarge { subsets: u128, limit: u128 },

    #[error("non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: line {line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures that come from the numerics rather than from the
    /// inputs (rank collapse, singular systems, degenerate residuals).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::RankDeficient { .. }
                | Error::Singular { .. }
                | Error::ZeroResidual
                | Error::DegenerateResidual(_)
        )
    }
}
