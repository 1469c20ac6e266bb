use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config field `{field}`: {message}")]
    Config { field: String, message: String },
    #[error(transparent)]
    Core(#[from] magpack_core::Error),
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Fit(String),
}

pub type CliResult<T> = Result<T, CliError>;
