use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("duplicate id {0}")]
    DuplicateId(String),

    #[error("missing mandatory columns: {}", .0.join(", "))]
    MissingColumns(Vec<String>),

    #[error("drug {id}: {reason}")]
    InvalidRecord { id: String, reason: String },

    #[error("no data for feature kind {0}")]
    NoFeatureData(String),

    #[error("no usable numeric features")]
    NoUsableFeatures,

    #[error("non-finite value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },

    #[error("matrix is not symmetric (max |a_ij - a_ji| = {max_dev:e})")]
    Asymmetric { max_dev: f64 },

    #[error("jacobi eigensolver did not converge after {sweeps} sweeps (off-diagonal norm {residual:e})")]
    NoConvergence { sweeps: usize, residual: f64 },

    #[error("invalid number of clusters k={k} for {n} points")]
    InvalidK { k: usize, n: usize },

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("silhouette undefined for {k} clusters over {n} points")]
    SilhouetteUndefined { k: usize, n: usize },

    #[error("id {0} not present in the full id list")]
    UnknownId(String),

    #[error("id order mismatch between matrices")]
    IdMismatch,

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("training diverged at epoch {epoch} (loss {loss})")]
    Divergence { epoch: usize, loss: f64 },

    #[error("file not found {}", .0.display())]
    FileNotFound(PathBuf),

    #[error("missing artifact {artifact}; run `{producer}` first")]
    MissingArtifact { artifact: String, producer: String },

    #[error("malformed {what}: {reason}")]
    Malformed { what: String, reason: String },

    #[error("stage {stage}: {source}")]
    Stage {
        stage: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error("config: {0}")]
    Config(String),
}

impl Error {
    pub fn in_stage(self, stage: &str) -> Error {
        match self {
            e @ Error::Stage { .. } => e,
            other => Error::Stage {
                stage: stage.to_string(),
                source: Box::new(other),
            },
        }
    }
}
