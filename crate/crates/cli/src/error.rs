// SPDX-License-Identifier: Apache-2.0

use std::fmt;

use qdmd::dmd::DmdError;
use qdmd::ed::EdError;
use qdmd::gpr::GprError;
use qdmd::ising::IsingError;
use qdmd::signal::SignalError;
use qdmd::SeriesError;

/// Failure classes, each with its own exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Class {
    Config,
    Numeric,
    Io,
}

impl Class {
    pub fn exit_code(self) -> i32 {
        match self {
            Class::Config => 2,
            Class::Numeric => 3,
            Class::Io => 4,
        }
    }
}

#[derive(Debug)]
pub struct CliError {
    pub class: Class,
    pub message: String,
}

pub type Result<T> = std::result::Result<T, CliError>;

impl CliError {
    pub fn config(message: impl Into<String>) -> Self {
        Self { class: Class::Config, message: message.into() }
    }

    pub fn io(message: impl Into<String>) -> Self {
        Self { class: Class::Io, message: message.into() }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = match self.class {
            Class::Config => "config error",
            Class::Numeric => "numerical failure",
            Class::Io => "i/o error",
        };
        write!(f, "{tag}: {}", self.message)
    }
}

/// Adds a leading phrase to an error message without changing its class.
pub trait Context<T> {
    fn context(self, what: impl FnOnce() -> String) -> Result<T>;
}

impl<T, E: Into<CliError>> Context<T> for std::result::Result<T, E> {
    fn context(self, what: impl FnOnce() -> String) -> Result<T> {
        self.map_err(|e| {
            let e = e.into();
            CliError { class: e.class, message: format!("{}: {}", what(), e.message) }
        })
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::io(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::io(e.to_string())
    }
}

impl From<toml::de::Error> for CliError {
    fn from(e: toml::de::Error) -> Self {
        CliError::config(e.to_string())
    }
}

impl From<SeriesError> for CliError {
    fn from(e: SeriesError) -> Self {
        let class = match e {
            SeriesError::BadStep(_) => Class::Config,
            _ => Class::Io,
        };
        CliError { class, message: e.to_string() }
    }
}

impl From<DmdError> for CliError {
    fn from(e: DmdError) -> Self {
        let class = match e {
            DmdError::InvalidWindow { .. }
            | DmdError::BadCutoff(_)
            | DmdError::BadRankBound
            | DmdError::BadRange { .. } => Class::Config,
            DmdError::Format(_) => Class::Io,
            _ => Class::Numeric,
        };
        CliError { class, message: e.to_string() }
    }
}

impl From<IsingError> for CliError {
    fn from(e: IsingError) -> Self {
        match e {
            IsingError::OffCritical { .. } => CliError::config(e.to_string()),
            IsingError::Series(s) => s.into(),
        }
    }
}

impl From<EdError> for CliError {
    fn from(e: EdError) -> Self {
        let class = match e {
            EdError::NotNormalized(_)
            | EdError::ConvergenceFailure(_)
            | EdError::RankDeficient { .. }
            | EdError::Linalg(_) => Class::Numeric,
            EdError::Series(s) => return s.into(),
            _ => Class::Config,
        };
        CliError { class, message: e.to_string() }
    }
}

impl From<SignalError> for CliError {
    fn from(e: SignalError) -> Self {
        let class = match e {
            SignalError::Dmd(d) => return d.into(),
            SignalError::Series(s) => return s.into(),
            SignalError::Io { .. } => Class::Io,
            SignalError::NoPlateau { .. }
            | SignalError::TooFewPeaks { .. }
            | SignalError::NotPowerLaw { .. }
            | SignalError::TooFewSingularValues { .. } => Class::Numeric,
            _ => Class::Config,
        };
        CliError { class, message: e.to_string() }
    }
}

impl From<GprError> for CliError {
    fn from(e: GprError) -> Self {
        let class = match e {
            GprError::Signal(s) => return s.into(),
            GprError::Series(s) => return s.into(),
            GprError::BadKernel(_) | GprError::BadData(_) => Class::Config,
            _ => Class::Numeric,
        };
        CliError { class, message: e.to_string() }
    }
}
