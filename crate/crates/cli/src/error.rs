use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error at `{key}`: {reason}")]
    Config { key: String, reason: String },

    #[error("no convergence: {0}")]
    Nonconvergence(String),

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl CliError {
    pub fn config(key: impl Into<String>, reason: impl Into<String>) -> Self {
        CliError::Config {
            key: key.into(),
            reason: reason.into(),
        }
    }

    /// 1 config, 2 nonconvergence or infrastructure, 3 invariant violation.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config { .. } => 1,
            CliError::Nonconvergence(_) | CliError::Io(_) | CliError::Csv(_) => 2,
            CliError::Invariant(_) => 3,
        }
    }

    /// Short machine-readable tag for the status file.
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Config { .. } => "config",
            CliError::Nonconvergence(_) => "nonconvergence",
            CliError::Invariant(_) => "invariant",
            CliError::Io(_) | CliError::Csv(_) => "io",
        }
    }
}

impl From<singular_core::Error> for CliError {
    fn from(e: singular_core::Error) -> Self {
        use singular_core::Error as E;
        match e {
            E::InvalidParameter { name, .. } => CliError::config(name, e.to_string()),
            E::GridMismatch(_) | E::EmptyCompact { .. } => CliError::config("domain", e.to_string()),
            E::LinearSolve { .. } | E::Eigen { .. } | E::NonFinite { .. } | E::Unconverged => {
                CliError::Nonconvergence(e.to_string())
            }
            E::Domain { .. }
            | E::InvertedSandwich { .. }
            | E::NonPositiveSub { .. }
            | E::SandwichBreach { .. } => CliError::Invariant(e.to_string()),
        }
    }
}
