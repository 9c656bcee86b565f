use std::path::Path;

use thiserror::Error;

use icnn_opf::certify::CertifyError;
use icnn_opf::datagen::DataError;
use icnn_opf::evalkit::EvalError;
use icnn_opf::grid::ParseError;
use icnn_opf::icnn::IcnnError;
use icnn_opf::opf::{FormulationError, OpfError};
use icnn_opf::trainer::TrainError;

/// Failure of a subcommand, classified by the process exit code it maps to.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Empty(String),
    #[error("{0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Input(_) => 2,
            CliError::Empty(_) => 3,
            CliError::Numerical(_) => 4,
            CliError::Usage(_) => 64,
        }
    }

    pub fn io(path: &Path, e: std::io::Error) -> Self {
        CliError::Input(format!("{}: {e}", path.display()))
    }
}

impl From<ParseError> for CliError {
    fn from(e: ParseError) -> Self {
        CliError::Input(format!("case file: {e}"))
    }
}

impl From<OpfError> for CliError {
    fn from(e: OpfError) -> Self {
        match e {
            OpfError::Lp(_) => CliError::Numerical(e.to_string()),
            _ => CliError::Input(e.to_string()),
        }
    }
}

impl From<FormulationError> for CliError {
    fn from(e: FormulationError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<DataError> for CliError {
    fn from(e: DataError) -> Self {
        match e {
            DataError::Config(_) => CliError::Usage(e.to_string()),
            DataError::AllInfeasible(_) | DataError::TooFewSamples { .. } => CliError::Empty(e.to_string()),
            DataError::Schema { .. } => CliError::Input(format!("dataset: {e}")),
            DataError::Opf(e) => e.into(),
        }
    }
}

impl From<IcnnError> for CliError {
    fn from(e: IcnnError) -> Self {
        CliError::Input(format!("model: {e}"))
    }
}

impl From<TrainError> for CliError {
    fn from(e: TrainError) -> Self {
        match e {
            TrainError::EmptySplit(_) => CliError::Empty(e.to_string()),
            TrainError::Config(_) => CliError::Input(format!("training config: {e}")),
            TrainError::Divergence { .. } => CliError::Numerical(e.to_string()),
            TrainError::Model(e) => e.into(),
        }
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::EmptySplit(_) => CliError::Empty(e.to_string()),
            _ => CliError::Input(e.to_string()),
        }
    }
}

impl From<CertifyError> for CliError {
    fn from(e: CertifyError) -> Self {
        match e {
            CertifyError::Empty => CliError::Empty(e.to_string()),
            CertifyError::Lp(_) | CertifyError::Solver(_) => CliError::Numerical(e.to_string()),
            _ => CliError::Input(e.to_string()),
        }
    }
}
