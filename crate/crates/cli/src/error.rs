use std::path::PathBuf;

use depmeter::dependence::DependenceError;
use depmeter::discrete::DiscreteError;
use depmeter::gaussian::GaussianError;
use depmeter::ipm::IpmError;
use depmeter::simgen::SimError;
use depmeter::structure::StructureError;
use depmeter::DatasetError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("unknown model {0:?} (expected linear-sem, nonlinear-eq12, group or ratio)")]
    UnknownModel(String),
    #[error("{0}")]
    BadParams(String),
    #[error("config: {0}")]
    BadConfig(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Dependence(#[from] DependenceError),
    #[error(transparent)]
    Structure(#[from] StructureError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Discrete(#[from] DiscreteError),
    #[error(transparent)]
    Ipm(#[from] IpmError),
    #[error(transparent)]
    Gaussian(#[from] GaussianError),
}

impl CliError {
    pub fn code(&self) -> &'static str {
        match self {
            CliError::UnknownModel(_) => "UnknownModel",
            CliError::BadParams(_) => "BadParams",
            CliError::BadConfig(_) => "BadConfig",
            CliError::Io { .. } => "Io",
            CliError::Dataset(e) => e.code(),
            CliError::Dependence(e) => e.code(),
            CliError::Structure(e) => e.code(),
            CliError::Sim(e) => e.code(),
            CliError::Discrete(e) => e.code(),
            CliError::Ipm(e) => e.code(),
            CliError::Gaussian(e) => e.code(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io { path: path.into(), source }
    }
}
