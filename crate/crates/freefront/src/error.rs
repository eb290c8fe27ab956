use std::path::PathBuf;

/// Failures of a command-line run. Every variant maps to one exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Unreadable, malformed or inconsistent configuration.
    #[error("config error: {0}")]
    Config(String),

    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("cannot write {path}: {source}")]
    Write {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// An error raised inside a numerical module, tagged with that module.
    #[error("{module}: {source}")]
    Numerical {
        module: &'static str,
        #[source]
        source: freefront_core::Error,
    },

    /// The run finished but at least one check failed.
    #[error("{0}")]
    ChecksFailed(String),
}

impl CliError {
    /// 2 for configuration problems, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        use freefront_core::Error as E;
        match self {
            CliError::Config(_) | CliError::Read { .. } => 2,
            CliError::Numerical { source, .. } => match source {
                E::Config(_) | E::Grid(_) | E::InvalidKernel(_) | E::InvalidDatum(_) => 2,
                _ => 1,
            },
            CliError::Write { .. } | CliError::ChecksFailed(_) => 1,
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

/// Attaches the module name to a core error.
pub(crate) trait Context<T> {
    fn context(self, module: &'static str) -> CliResult<T>;
}

impl<T> Context<T> for freefront_core::Result<T> {
    fn context(self, module: &'static str) -> CliResult<T> {
        self.map_err(|source| CliError::Numerical { module, source })
    }
}
