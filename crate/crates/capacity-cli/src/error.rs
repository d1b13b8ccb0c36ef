use thiserror::Error;

/// CLI errors carrying their process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("budget exceeded: {0}")]
    Budget(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::Io(_) => 1,
            CliError::Numerical(_) => 2,
            CliError::Budget(_) => 3,
        }
    }
}

impl From<capacity::Error> for CliError {
    fn from(e: capacity::Error) -> Self {
        match e {
            capacity::Error::Numerical(m) => CliError::Numerical(m),
            capacity::Error::Budget(m) => CliError::Budget(m),
            other => CliError::Config(other.to_string()),
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
