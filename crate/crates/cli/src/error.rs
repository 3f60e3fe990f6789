use serde_json::{json, Value};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_PARTIAL: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;

/// A failure reported as `{code, message, context}` on stderr.
#[derive(Debug, Clone)]
pub struct CliError {
    pub code: String,
    pub message: String,
    pub context: Value,
    pub exit: i32,
}

impl CliError {
    pub fn validation(code: &str, message: impl Into<String>) -> CliError {
        CliError {
            code: code.to_owned(),
            message: message.into(),
            context: json!({}),
            exit: EXIT_VALIDATION,
        }
    }

    pub fn runtime(code: &str, message: impl Into<String>) -> CliError {
        CliError {
            exit: EXIT_RUNTIME,
            ..CliError::validation(code, message)
        }
    }

    pub fn with_context(mut self, context: Value) -> CliError {
        self.context = context;
        self
    }

    pub fn to_json(&self) -> String {
        json!({ "code": self.code, "message": self.message, "context": self.context }).to_string()
    }
}

impl From<semisup::Error> for CliError {
    fn from(e: semisup::Error) -> CliError {
        let code = e.code();
        let exit = match code {
            "parse" | "validation" | "config" | "type" | "unsupported_mode" | "insufficient_data" => EXIT_VALIDATION,
            _ => EXIT_RUNTIME,
        };
        CliError {
            code: code.to_owned(),
            message: e.to_string(),
            context: json!({}),
            exit,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> CliError {
        CliError::runtime("io", e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> CliError {
        CliError::runtime("json", e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> CliError {
        CliError::runtime("io", e.to_string())
    }
}
