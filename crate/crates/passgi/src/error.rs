use std::io;
use std::path::{Path, PathBuf};

use passgi_core::{CatalogError, PatchError, StatsError};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error("configuration error: {0}")]
    Config(String),
    #[error("{}: {source}", path.display())]
    Catalog { path: PathBuf, source: CatalogError },
    #[error("{}: {source}", path.display())]
    Patch { path: PathBuf, source: PatchError },
    #[error("baseline evaluation failed ({status}): {diagnostics}")]
    BaselineFailed { status: String, diagnostics: String },
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error("malformed input: {0}")]
    Malformed(String),
    #[error("all {0} trials failed")]
    AllTrialsFailed(usize),
}

impl Error {
    pub fn io(path: &Path, source: io::Error) -> Self {
        Error::Io { path: path.to_path_buf(), source }
    }

    /// 2 for usage and configuration problems, 1 for runtime failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io { .. } | Error::Config(_) | Error::Catalog { .. } | Error::Patch { .. } | Error::Malformed(_) => 2,
            Error::BaselineFailed { .. } | Error::Stats(_) | Error::AllTrialsFailed(_) => 1,
        }
    }
}
