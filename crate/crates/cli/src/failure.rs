use std::fmt;

/// Error surfaced to the shell with its exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

/// Model-domain failure.
pub const EXIT_MODEL: u8 = 1;
/// I/O or configuration failure.
pub const EXIT_CONFIG: u8 = 2;

impl Failure {
    pub fn config(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_CONFIG,
            message: message.into(),
        }
    }
}

pub fn config_error(field: &str, e: impl fmt::Display) -> Failure {
    Failure::config(format!("field `{field}`: {e}"))
}

impl From<dps_core::error::Error> for Failure {
    fn from(e: dps_core::error::Error) -> Self {
        Self {
            code: if e.is_io_or_config() {
                EXIT_CONFIG
            } else {
                EXIT_MODEL
            },
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Self::config(e.to_string())
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}
