use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error(transparent)]
    Compute(codcov::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 2,
            CliError::Compute(_) => 3,
        }
    }
}

impl From<codcov::Error> for CliError {
    fn from(e: codcov::Error) -> Self {
        match e {
            codcov::Error::InvalidParameter(_) | codcov::Error::DimensionMismatch(_) => CliError::Input(e.to_string()),
            other => CliError::Compute(other),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
