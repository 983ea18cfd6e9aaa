use thiserror::Error;

/// Exit code 2 for anything wrong with the user's input, 1 for failures
/// while running.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("{0}")]
    Runtime(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Runtime(_) | CliError::Io(_) => 1,
        }
    }
}

impl From<blockqkd::Error> for CliError {
    fn from(e: blockqkd::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}
