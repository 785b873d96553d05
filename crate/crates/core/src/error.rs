use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{}:{line}: column `{column}`: {message}", file.display())]
    MalformedRow {
        file: PathBuf,
        line: u64,
        column: String,
        message: String,
    },

    #[error("{}:{line}: duplicate key ({stock}, {key})", file.display())]
    DuplicateKey {
        file: PathBuf,
        line: u64,
        stock: String,
        key: String,
    },

    #[error("{}:{line}: dates not increasing for stock {stock} at {key}", file.display())]
    NonMonotonicDates {
        file: PathBuf,
        line: u64,
        stock: String,
        key: String,
    },

    #[error("missing input file {}", .0.display())]
    MissingFile(PathBuf),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}: {source}", path.display())]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error("empty calendar: no stock has any observation")]
    EmptyCalendar,

    #[error("panel is empty after {0}")]
    EmptyPanel(&'static str),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("insufficient data for {what}: need {needed}, have {available}")]
    InsufficientData {
        what: &'static str,
        needed: usize,
        available: usize,
    },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("rank-deficient design: column `{column}` is linearly dependent on earlier columns")]
    RankDeficient { column: String },

    #[error("{stage}: {source}")]
    Stage {
        stage: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    /// Attributes an error to a pipeline stage for top-level reporting.
    pub fn in_stage(self, stage: impl Into<String>) -> Error {
        match self {
            e @ Error::Stage { .. } => e,
            other => Error::Stage {
                stage: stage.into(),
                source: Box::new(other),
            },
        }
    }
}
