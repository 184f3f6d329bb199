//! Error-to-exit-code mapping: 0 success, 2 usage/schema, 3 data.

use rtbopt_core::data::DataError;
use rtbopt_core::model::ModelError;
use rtbopt_core::scoring::ScoringError;
use rtbopt_core::search::SearchError;
use rtbopt_core::strategies::StrategiesError;

pub const EXIT_USAGE: u8 = 2;
pub const EXIT_DATA: u8 = 3;

#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

pub fn usage(message: impl Into<String>) -> CliError {
    CliError {
        code: EXIT_USAGE,
        message: message.into(),
    }
}

pub fn data(message: impl Into<String>) -> CliError {
    CliError {
        code: EXIT_DATA,
        message: message.into(),
    }
}

impl From<DataError> for CliError {
    fn from(e: DataError) -> Self {
        let code = match &e {
            DataError::MissingColumn(_) | DataError::Argument(_) | DataError::SyntheticSpec(_) => {
                EXIT_USAGE
            }
            _ => EXIT_DATA,
        };
        CliError {
            code,
            message: e.to_string(),
        }
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        let code = match &e {
            ModelError::InvalidHashSize(_)
            | ModelError::InvalidAlpha(_)
            | ModelError::InvalidThreshold(_) => EXIT_USAGE,
            _ => EXIT_DATA,
        };
        CliError {
            code,
            message: e.to_string(),
        }
    }
}

impl From<SearchError> for CliError {
    fn from(e: SearchError) -> Self {
        usage(e.to_string())
    }
}

impl From<ScoringError> for CliError {
    fn from(e: ScoringError) -> Self {
        usage(e.to_string())
    }
}

impl From<StrategiesError> for CliError {
    fn from(e: StrategiesError) -> Self {
        match e {
            StrategiesError::InvalidSpec(m) => usage(format!("invalid experiment spec: {m}")),
            StrategiesError::Search(inner) => inner.into(),
            StrategiesError::Scoring(inner) => inner.into(),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        data(e.to_string())
    }
}
