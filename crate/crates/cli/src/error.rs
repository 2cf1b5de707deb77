use std::io;
use std::path::{Path, PathBuf};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error(transparent)]
    Lib(#[from] vmf_contrast::Error),
    #[error("{failed} of {total} checks failed")]
    ChecksFailed { failed: usize, total: usize },
}

pub type Result<T> = std::result::Result<T, CliError>;

impl CliError {
    pub fn io(path: &Path, source: io::Error) -> Self {
        Self::Io { path: path.to_path_buf(), source }
    }

    /// 2 for anything the caller got wrong, 1 for failures of the run itself.
    pub fn exit_code(&self) -> u8 {
        use vmf_contrast::Error as E;
        match self {
            Self::Usage(_) => 2,
            Self::Lib(E::Config(_) | E::Domain(_) | E::DimensionMismatch { .. } | E::GridCell { .. }) => 2,
            Self::Io { .. } | Self::Lib(_) | Self::ChecksFailed { .. } => 1,
        }
    }
}
