use std::path::PathBuf;

use jitdrift::ErrorKind;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error("cannot read config {path}: {source}")]
    ConfigRead {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("invalid config {path}: {source}")]
    ConfigParse {
        path: PathBuf,
        #[source]
        source: toml::de::Error,
    },

    #[error("dataset {dataset}{}: {stage} failed: {source}", .detector.as_deref().map(|d| format!(", detector {d}")).unwrap_or_default())]
    Stage {
        dataset: String,
        detector: Option<String>,
        stage: &'static str,
        #[source]
        source: jitdrift::Error,
    },

    #[error(transparent)]
    Core(#[from] jitdrift::Error),

    #[error("cannot write {path}: {source}")]
    Output {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    /// 2 for configuration problems, 3 for bad input data, 4 for runtime or
    /// numeric failures.
    pub fn exit_code(&self) -> u8 {
        let kind = match self {
            CliError::Config(_) | CliError::ConfigRead { .. } | CliError::ConfigParse { .. } => ErrorKind::Config,
            CliError::Stage { source, .. } | CliError::Core(source) => source.kind(),
            CliError::Output { .. } => ErrorKind::Runtime,
        };
        match kind {
            ErrorKind::Config => 2,
            ErrorKind::Data => 3,
            ErrorKind::Runtime => 4,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

pub(crate) fn stage<T>(
    dataset: &str,
    detector: Option<&str>,
    stage: &'static str,
    r: jitdrift::Result<T>,
) -> Result<T> {
    r.map_err(|source| CliError::Stage {
        dataset: dataset.to_string(),
        detector: detector.map(str::to_string),
        stage,
        source,
    })
}
