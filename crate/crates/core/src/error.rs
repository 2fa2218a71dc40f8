use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Which IDX container a parse error refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IdxKind {
    Images,
    Labels,
}

impl std::fmt::Display for IdxKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            IdxKind::Images => f.write_str("images"),
            IdxKind::Labels => f.write_str("labels"),
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("wrong magic for {kind}: expected {expected:#010x}, found {found:#010x}")]
    WrongMagic {
        kind: IdxKind,
        expected: u32,
        found: u32,
    },

    #[error("truncated {kind} file: need {expected} bytes, found {actual}")]
    Truncated {
        kind: IdxKind,
        expected: usize,
        actual: usize,
    },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("blank image: total intensity is zero, cannot align centroid")]
    BlankImage,

    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },

    #[error("matrix is not positive definite (pivot {pivot} = {value:e})")]
    NotPositiveDefinite { pivot: usize, value: f64 },

    #[error("eigen decomposition failed: {0}")]
    Eigen(String),

    #[error("linear program infeasible: equality row {row} ({name}) cannot be met within the box bounds (residual {residual:e})")]
    LpInfeasible {
        row: usize,
        name: &'static str,
        residual: f64,
    },

    #[error("linear program unbounded along column {column}")]
    LpUnbounded { column: usize },

    #[error("simplex iteration limit {0} reached")]
    LpIterationLimit(usize),

    #[error("empty sample set: {0}")]
    EmptySet(&'static str),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("class {class} has {count} samples, at least 2 are required")]
    TooFewSamples { class: usize, count: usize },

    #[error("requested {requested} axes but the axis matrix has numerical rank {rank}")]
    RankDeficient { requested: usize, rank: usize },

    #[error("malformed {what} file: {detail}")]
    Format { what: &'static str, detail: String },

    #[error("{stage} stage failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Wraps `self` with the pipeline stage it came from; already wrapped
    /// errors keep their innermost stage.
    pub fn in_stage(self, stage: &'static str) -> Self {
        match self {
            e @ Error::Stage { .. } => e,
            e => Error::Stage {
                stage,
                source: Box::new(e),
            },
        }
    }

    pub(crate) fn format(what: &'static str, detail: impl Into<String>) -> Self {
        Error::Format {
            what,
            detail: detail.into(),
        }
    }
}
