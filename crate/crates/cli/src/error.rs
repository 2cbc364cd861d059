use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Parse(String),
    #[error("config: `{field}` {message}")]
    Config { field: String, message: String },
    #[error("{0}")]
    Io(String),
    #[error("numeric abort: {0}")]
    Numeric(polykin::Error),
    #[error("verification failed: {0}")]
    Verification(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Verification(_) => 1,
            Self::Parse(_) | Self::Config { .. } | Self::Io(_) => 2,
            Self::Numeric(_) => 3,
        }
    }

    pub fn io(path: &std::path::Path, e: std::io::Error) -> Self {
        Self::Io(format!("{}: {e}", path.display()))
    }
}

impl From<polykin::Error> for CliError {
    fn from(e: polykin::Error) -> Self {
        use polykin::Error as E;
        match e {
            E::InvalidParameter { name, reason } => Self::Config {
                field: name.to_string(),
                message: reason,
            },
            E::GridMismatch(m) => Self::Config {
                field: "numerics".to_string(),
                message: m,
            },
            E::TooFewSamples { required, got } => Self::Config {
                field: "numerics.samples".to_string(),
                message: format!("{got} samples, need at least {required}"),
            },
            other => Self::Numeric(other),
        }
    }
}
