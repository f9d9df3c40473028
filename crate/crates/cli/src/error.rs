use brwlab::BrwError;

/// Failure classes with their process exit codes.
#[derive(Debug)]
pub enum CliError {
    /// Bad configuration or model parameters (exit 2).
    Config(String),
    /// Too many replicates lost to the population cap (exit 3).
    Capacity(String),
    /// An algebraic invariant failed (exit 4).
    Invariant(String),
    /// Anything else (exit 1).
    Other(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Capacity(_) => 3,
            CliError::Invariant(_) => 4,
            CliError::Other(_) => 1,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Capacity(_) => "capacity",
            CliError::Invariant(_) => "invariant",
            CliError::Other(_) => "internal",
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Config(m) | CliError::Capacity(m) | CliError::Invariant(m) | CliError::Other(m) => m,
        }
    }
}

impl From<BrwError> for CliError {
    fn from(e: BrwError) -> Self {
        let msg = e.to_string();
        match e {
            BrwError::Capacity { .. } | BrwError::UnfinishedLine { .. } => CliError::Capacity(msg),
            BrwError::Invariant(_) => CliError::Invariant(msg),
            BrwError::Domain(_)
            | BrwError::InvalidModel(_)
            | BrwError::Calibration(_)
            | BrwError::Drift { .. }
            | BrwError::MassOverflow { .. } => CliError::Config(msg),
            BrwError::Numeric { .. } | BrwError::RejectionExhausted { .. } | BrwError::Truncation(_) => CliError::Other(msg),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Other(e.to_string())
    }
}
