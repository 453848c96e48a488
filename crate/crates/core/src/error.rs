use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("word {word:?} maps to both {first:?} and {second:?}")]
    DuplicateConflict {
        word: String,
        first: String,
        second: String,
    },

    #[error("no vowel entry for {0:?}")]
    UnknownWord(String),

    #[error("malformed token stream at position {position}: {message}")]
    Structure { position: usize, message: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("training diverged at step {step}: loss {loss}")]
    NonFiniteLoss { step: usize, loss: f64 },

    #[error("generation failed ({message}); partial transcript: {partial}")]
    Generation { message: String, partial: String },

    #[error("checkpoint: {0}")]
    Checkpoint(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }
}
