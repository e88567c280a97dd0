use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("line {line}: {message}")]
    MalformedLine { line: usize, message: String },

    #[error("duplicate document id `{0}`")]
    DuplicateId(String),

    #[error("invalid document: {0}")]
    InvalidDocument(String),

    #[error("no valid scores in corpus")]
    NoValidScores,

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("dimension mismatch: model expects {expected} features, vector has {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("degenerate pools for cutoff {spec}: {message}")]
    DegeneratePool { spec: String, message: String },

    #[error("serialization: {0}")]
    Serde(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
