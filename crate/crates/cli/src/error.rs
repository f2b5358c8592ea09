use std::fmt;

use serde_json::json;

/// Failure classes with their process exit codes.
#[derive(Debug)]
pub enum CliError {
    /// Bad or inconsistent input, exit code 2.
    Config(String),
    /// Failure inside the numerics, exit code 3.
    Numeric(hcmix::Error),
    /// Output could not be written, exit code 1.
    Io(String),
}

impl CliError {
    pub fn from_validation(e: hcmix::Error) -> Self {
        CliError::Config(e.to_string())
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numeric(_) => 3,
            CliError::Io(_) => 1,
        }
    }

    /// Machine-readable report for stderr.
    pub fn report(&self) -> String {
        let value = match self {
            CliError::Config(msg) => json!({ "error": "config", "message": msg }),
            CliError::Numeric(e) => json!({ "error": "numeric", "kind": kind(e), "message": e.to_string() }),
            CliError::Io(msg) => json!({ "error": "io", "message": msg }),
        };
        value.to_string()
    }
}

fn kind(e: &hcmix::Error) -> &'static str {
    use hcmix::Error::*;
    match e {
        NonPositiveParameter { .. } => "NonPositiveParameter",
        CorrelationNotPositiveDefinite { .. } => "CorrelationNotPositiveDefinite",
        RhoVdDegenerate => "RhoVdDegenerate",
        RowOneDegenerate { .. } => "RowOneDegenerate",
        SingularSystem { .. } => "SingularSystem",
        DomainError(_) => "DomainError",
        InvalidContract(_) => "InvalidContract",
        UnsupportedContract(_) => "UnsupportedContract",
        KZero => "KZero",
        AssumptionViolated(_) => "AssumptionViolated",
        BothZero => "BothZero",
        InvalidArgument(_) => "InvalidArgument",
        Io(_) => "Io",
    }
}

impl From<hcmix::Error> for CliError {
    fn from(e: hcmix::Error) -> Self {
        match e {
            hcmix::Error::Io(msg) => CliError::Io(msg),
            e => CliError::Numeric(e),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) | CliError::Io(m) => f.write_str(m),
            CliError::Numeric(e) => write!(f, "{e}"),
        }
    }
}
