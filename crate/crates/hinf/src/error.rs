use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Core(#[from] hinf_core::Error),
    #[error("cannot access {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    ConfigSyntax {
        path: PathBuf,
        #[source]
        source: toml::de::Error,
    },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("data file line {line}: {message}")]
    DataFormat { line: usize, message: String },
    #[error("csv output: {0}")]
    Csv(#[from] csv::Error),
    #[error("manifest serialization: {0}")]
    Manifest(#[from] toml::ser::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> Error {
        let path = path.into();
        move |source| Error::Io { path, source }
    }

    /// Process exit status: 3 for an infeasible attenuation level, 1 for
    /// everything else that stops a run.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Core(hinf_core::Error::GammaTooSmall) => 3,
            _ => 1,
        }
    }
}
