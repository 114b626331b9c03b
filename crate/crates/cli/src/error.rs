use std::fmt;

use serde::Serialize;

/// Failure reported on stderr as one JSON object before exiting with code 1.
#[derive(Debug, Serialize)]
pub struct CliError {
    pub module: String,
    pub operation: String,
    pub cause: String,
}

impl CliError {
    pub fn new(module: &str, operation: &str, cause: impl fmt::Display) -> Self {
        CliError {
            module: module.to_string(),
            operation: operation.to_string(),
            cause: cause.to_string(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("error serializes")
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}::{}: {}", self.module, self.operation, self.cause)
    }
}

pub trait Context<T> {
    fn context(self, module: &str, operation: &str) -> Result<T, CliError>;
}

impl<T, E: fmt::Display> Context<T> for Result<T, E> {
    fn context(self, module: &str, operation: &str) -> Result<T, CliError> {
        self.map_err(|e| CliError::new(module, operation, e))
    }
}
