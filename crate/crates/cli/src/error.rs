use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, CliError>;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{}: {msg}", path.display())]
    Wav { path: PathBuf, msg: String },

    #[error("{}: mono required, found {channels} channels", path.display())]
    MonoRequired { path: PathBuf, channels: u16 },

    #[error("sample rate mismatch: {source_rate} Hz source, {target_rate} Hz target")]
    SampleRateMismatch { source_rate: u32, target_rate: u32 },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}: {msg}", path.display())]
    Image { path: PathBuf, msg: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Core(#[from] specmorph::Error),
}

impl CliError {
    pub(crate) fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> CliError {
        let path = path.into();
        move |source| CliError::Io { path, source }
    }

    /// 2 for numerical failures, 1 for everything the user can fix by
    /// changing inputs or flags.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(e) if e.is_numerical() => 2,
            _ => 1,
        }
    }
}
