use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("episode finished")]
    EpisodeFinished,

    #[error("budget underflow")]
    BudgetUnderflow,

    #[error("cannot calibrate: no worsening observed")]
    NoWorseningObserved,

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("non-finite {what} at update {update} (batch indices {indices:?})")]
    NonFinite {
        what: &'static str,
        update: u64,
        indices: Vec<usize>,
    },

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("malformed log {path}: {message}")]
    MalformedLog { path: PathBuf, message: String },

    #[error("oracle bridge: {0}")]
    Bridge(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    TomlDe(#[from] toml::de::Error),

    #[error(transparent)]
    TomlSer(#[from] toml::ser::Error),
}
