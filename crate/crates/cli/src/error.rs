//! Failure categories of the command-line tool, each with a stable exit
//! code so scripts can tell classes of failure apart.

use std::fmt;

/// Everything that can go wrong, sorted by exit code.
#[derive(Debug)]
pub enum CliError {
    /// The run itself failed (for example a numerical failure inside the
    /// filter). Exit code 1.
    Runtime(String),
    /// The config file is missing or unreadable. Exit code 2.
    ConfigAccess(String),
    /// The config file is not valid TOML. Exit code 3.
    ConfigSyntax(String),
    /// The config parsed but its contents are invalid: unknown key, wrong
    /// type, or an out-of-range value. Exit code 4.
    ConfigValue(String),
    /// Results could not be written. Exit code 5.
    Output(String),
}

impl CliError {
    /// The process exit code for this failure.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Runtime(_) => 1,
            CliError::ConfigAccess(_) => 2,
            CliError::ConfigSyntax(_) => 3,
            CliError::ConfigValue(_) => 4,
            CliError::Output(_) => 5,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Runtime(m)
            | CliError::ConfigAccess(m)
            | CliError::ConfigSyntax(m)
            | CliError::ConfigValue(m)
            | CliError::Output(m) => f.write_str(m),
        }
    }
}

impl std::error::Error for CliError {}
