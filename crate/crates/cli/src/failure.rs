use thiserror::Error;

#[derive(Debug, Error)]
pub enum Failure {
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] disperse_core::Error),
    #[error("{0}")]
    Io(String),
    #[error("verification failed: {0}")]
    Verify(String),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        use disperse_core::Error as E;
        match self {
            Failure::Config(_) => 2,
            Failure::Core(e) => match e {
                E::Config(_) | E::Usage(_) | E::Topology(_) | E::InvalidPmf(_) => 2,
                E::Stability { .. } | E::DivisionByZero => 3,
                E::Truncation { .. } => 4,
                E::Divergence { .. } => 5,
                E::Budget { .. } => 7,
                _ => 1,
            },
            Failure::Io(_) => 1,
            Failure::Verify(_) => 6,
        }
    }
}

pub type Outcome<T> = std::result::Result<T, Failure>;

pub fn io_err(what: &std::path::Path, e: std::io::Error) -> Failure {
    Failure::Io(format!("{}: {e}", what.display()))
}
