use std::path::PathBuf;

pub type Result<T, E = HarnessError> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("drop {drop}, slot {slot:?}, {scheduler}: {source}")]
    Simulation {
        drop: usize,
        slot: Option<usize>,
        scheduler: &'static str,
        #[source]
        source: compsched_core::Error,
    },

    #[error(transparent)]
    Core(#[from] compsched_core::Error),

    #[error("invalid config: {0}")]
    Config(String),

    #[error("cannot parse {path}: {source}")]
    ConfigParse {
        path: PathBuf,
        #[source]
        source: toml::de::Error,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl HarnessError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        HarnessError::Io { path: path.into(), source }
    }
}
