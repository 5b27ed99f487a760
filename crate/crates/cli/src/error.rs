use std::io;

use flatflow::Error;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] Error),
    #[error(transparent)]
    Io(#[from] io::Error),
}

pub type CliResult<T> = std::result::Result<T, CliError>;

impl CliError {
    /// 2 for anything wrong with the inputs, 3 for failures while computing
    /// or writing.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Core(e) => match e {
                Error::InvalidGrid(_)
                | Error::InvalidArgument(_)
                | Error::ResolutionViolation { .. }
                | Error::ShapeOutOfDomain
                | Error::NotOnLattice(_)
                | Error::ScaleBelowParabolicCutoff { .. }
                | Error::CylinderOutsideDomain
                | Error::Format(_) => 2,
                _ => 3,
            },
            CliError::Io(_) => 3,
        }
    }
}
