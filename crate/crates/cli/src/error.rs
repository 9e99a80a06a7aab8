use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error("invalid input: {0}")]
    Input(String),

    #[error("{0}")]
    Leak(String),

    #[error("fit did not converge")]
    NotConverged,

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Core(#[from] qkr::Error),
}

impl CliError {
    /// Process exit status for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Input(_) => 2,
            CliError::Leak(_) => 3,
            CliError::NotConverged => 4,
            CliError::Io { .. } => 1,
            CliError::Core(qkr::Error::BoundaryLeak { .. }) => 3,
            CliError::Core(_) => 2,
        }
    }

    pub(crate) fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.display().to_string(),
            source,
        }
    }
}

/// Turns a boundary leak into an abort message that suggests a remedy.
pub(crate) fn simulation_error(e: qkr::Error) -> CliError {
    match e {
        qkr::Error::BoundaryLeak { .. } => CliError::Leak(format!(
            "{e} (key `n_max` of the [simulation] table)"
        )),
        other => CliError::Core(other),
    }
}
