use std::fmt;

/// Process exit codes.
pub const EXIT_OK: u8 = 0;
pub const EXIT_USAGE: u8 = 2;
pub const EXIT_DATA: u8 = 3;
pub const EXIT_COMPUTE: u8 = 4;

/// A failure reported as `{"error": {"code", "message"}}` on stderr.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CliError {
    pub code: String,
    pub message: String,
    pub exit: u8,
}

impl CliError {
    pub fn data(code: &str, message: impl Into<String>) -> Self {
        Self { code: code.into(), message: message.into(), exit: EXIT_DATA }
    }

    pub fn usage(message: impl Into<String>) -> Self {
        Self { code: "usage".into(), message: message.into(), exit: EXIT_USAGE }
    }

    pub fn to_json(&self) -> String {
        serde_json::json!({ "error": { "code": self.code, "message": self.message } }).to_string()
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.code, self.message)
    }
}

impl std::error::Error for CliError {}

impl From<gnnx_core::Error> for CliError {
    fn from(e: gnnx_core::Error) -> Self {
        let exit = if e.is_data_error() { EXIT_DATA } else { EXIT_COMPUTE };
        Self { code: e.code().into(), message: e.to_string(), exit }
    }
}

impl From<gnnx_service::ServeError> for CliError {
    fn from(e: gnnx_service::ServeError) -> Self {
        let exit = if matches!(e, gnnx_service::ServeError::MissingDir { .. }) { EXIT_DATA } else { EXIT_COMPUTE };
        Self { code: e.code().into(), message: e.to_string(), exit }
    }
}
