use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("cannot read config {path}: {source}")]
    UnreadableConfig { path: PathBuf, source: std::io::Error },

    #[error("bad config: {0}")]
    BadConfig(String),

    #[error("missing {artifact} at {path} (run `{producer}` first)")]
    MissingArtifact { artifact: &'static str, path: PathBuf, producer: &'static str },

    #[error("cannot read {artifact} at {path}: {source}")]
    CorruptArtifact { artifact: &'static str, path: PathBuf, source: gfm_core::Error },

    #[error("cannot start thread pool: {0}")]
    ThreadPool(#[from] rayon::ThreadPoolBuildError),

    #[error(transparent)]
    Core(#[from] gfm_core::Error),

    #[error("i/o error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

pub type Result<T> = std::result::Result<T, CliError>;
