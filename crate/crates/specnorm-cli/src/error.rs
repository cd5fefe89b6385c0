use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Lib(#[from] specnorm::Error),
    #[error("malformed document: {0}")]
    Format(String),
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("witness mismatch: {0}")]
    WitnessMismatch(String),
}

impl CliError {
    /// 2 invalid input, 3 no convergence, 4 point out of scope, 5 witness mismatch.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Lib(e) => match e {
                specnorm::Error::NoConvergence { .. }
                | specnorm::Error::InfeasibleDetected(_)
                | specnorm::Error::ConvergenceFailure => 3,
                specnorm::Error::DegeneratePoint(_) => 4,
                _ => 2,
            },
            CliError::Format(_) | CliError::Io { .. } => 2,
            CliError::WitnessMismatch(_) => 5,
        }
    }
}
