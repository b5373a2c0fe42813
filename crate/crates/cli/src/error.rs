use std::fmt;
use std::process::ExitCode;

/// Stable exit codes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Argument = 2,
    Data = 3,
    Model = 4,
}

#[derive(Debug)]
pub struct CliError {
    pub status: Status,
    pub message: String,
}

impl CliError {
    pub fn argument(message: impl fmt::Display) -> Self {
        Self { status: Status::Argument, message: message.to_string() }
    }

    pub fn data(message: impl fmt::Display) -> Self {
        Self { status: Status::Data, message: message.to_string() }
    }

    pub fn model(message: impl fmt::Display) -> Self {
        Self { status: Status::Model, message: message.to_string() }
    }

    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(self.status as u8)
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

/// Attaches an exit status to core errors.
pub trait Context<T> {
    fn or_argument(self, what: &str) -> Result<T, CliError>;
    fn or_data(self, what: &str) -> Result<T, CliError>;
    fn or_model(self, what: &str) -> Result<T, CliError>;
}

impl<T, E: fmt::Display> Context<T> for Result<T, E> {
    fn or_argument(self, what: &str) -> Result<T, CliError> {
        self.map_err(|e| CliError::argument(format!("{what}: {e}")))
    }

    fn or_data(self, what: &str) -> Result<T, CliError> {
        self.map_err(|e| CliError::data(format!("{what}: {e}")))
    }

    fn or_model(self, what: &str) -> Result<T, CliError> {
        self.map_err(|e| CliError::model(format!("{what}: {e}")))
    }
}
