use thiserror::Error;

use kitwpa::calfit::CalfitError;
use kitwpa::gain::GainError;
use kitwpa::network::io::SParamIoError;
use kitwpa::network::NetworkError;
use kitwpa::noisechain::NoiseError;
use kitwpa::nonlinearity::NonlinearityError;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid configuration:\n  {}", .0.join("\n  "))]
    Validation(Vec<String>),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Numerical(_) => 2,
            CliError::Io(_) => 3,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        if e.is_io() {
            CliError::Io(e.to_string())
        } else {
            CliError::Validation(vec![e.to_string()])
        }
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        if e.is_io_error() {
            CliError::Io(e.to_string())
        } else {
            CliError::Validation(vec![e.to_string()])
        }
    }
}

impl From<NetworkError> for CliError {
    fn from(e: NetworkError) -> Self {
        match e {
            NetworkError::InvalidSpec { .. } | NetworkError::InvalidGrid(_) => CliError::Validation(vec![e.to_string()]),
            other => CliError::Numerical(other.to_string()),
        }
    }
}

impl From<NonlinearityError> for CliError {
    fn from(e: NonlinearityError) -> Self {
        CliError::Validation(vec![e.to_string()])
    }
}

impl From<NoiseError> for CliError {
    fn from(e: NoiseError) -> Self {
        match e {
            NoiseError::DegenerateEfficiency { .. } => CliError::Numerical(e.to_string()),
            other => CliError::Validation(vec![other.to_string()]),
        }
    }
}

impl From<GainError> for CliError {
    fn from(e: GainError) -> Self {
        match e {
            GainError::Network(n) => n.into(),
            GainError::Nonlinearity(n) => n.into(),
            GainError::Invalid { .. } | GainError::Parse { .. } => CliError::Validation(vec![e.to_string()]),
            GainError::Io(_) => CliError::Io(e.to_string()),
            other => CliError::Numerical(other.to_string()),
        }
    }
}

impl From<SParamIoError> for CliError {
    fn from(e: SParamIoError) -> Self {
        match e {
            SParamIoError::Io(_) => CliError::Io(e.to_string()),
            SParamIoError::Network(n) => n.into(),
            other => CliError::Validation(vec![other.to_string()]),
        }
    }
}

impl From<CalfitError> for CliError {
    fn from(e: CalfitError) -> Self {
        match e {
            CalfitError::Io { .. } => CliError::Io(e.to_string()),
            CalfitError::NoConvergence { .. } => CliError::Numerical(e.to_string()),
            other => CliError::Validation(vec![other.to_string()]),
        }
    }
}
