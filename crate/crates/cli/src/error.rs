use std::fmt;
use std::process::ExitCode;

/// A failure reported as one line on stderr.
#[derive(Debug)]
pub enum CliError {
    /// Bad flags or configuration, exit status 2.
    Usage(String),
    /// A library error during computation, exit status 1.
    Compute(twedge::Error),
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        match self {
            CliError::Usage(_) => ExitCode::from(2),
            CliError::Compute(_) => ExitCode::from(1),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (name, msg) = match self {
            CliError::Usage(m) => ("UsageError", m.clone()),
            CliError::Compute(e) => (e.name(), e.to_string()),
        };
        let msg = msg.split_whitespace().collect::<Vec<_>>().join(" ");
        write!(f, "error: {name}: {msg}")
    }
}

impl From<twedge::Error> for CliError {
    fn from(e: twedge::Error) -> Self {
        CliError::Compute(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Compute(e.into())
    }
}
