use std::path::{Path, PathBuf};

/// Process exit codes.
pub mod exit {
    pub const OK: u8 = 0;
    pub const FAILURE: u8 = 1;
    pub const MISSING_UPSTREAM: u8 = 2;
    pub const CONFIG: u8 = 3;
    pub const DATA: u8 = 4;
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("missing upstream artifact `{artifact}` from stage `{stage}`: {detail}")]
    MissingUpstream { stage: String, artifact: String, detail: String },
    #[error("config error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("{0}")]
    Core(#[from] fatlens_core::Error),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{0}")]
    Other(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::MissingUpstream { .. } => exit::MISSING_UPSTREAM,
            CliError::Config(_) | CliError::Core(fatlens_core::Error::Config(_)) => exit::CONFIG,
            CliError::Data(_) | CliError::Core(_) => exit::DATA,
            CliError::Io { .. } | CliError::Other(_) => exit::FAILURE,
        }
    }

    pub fn io(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
        move |source| CliError::Io { path: path.to_path_buf(), source }
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;
