use thiserror::Error;

pub type Result<T> = std::result::Result<T, HarnessError>;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Core(#[from] stmala_core::Error),
}

impl From<csv::Error> for HarnessError {
    fn from(e: csv::Error) -> Self {
        HarnessError::Core(e.into())
    }
}

impl HarnessError {
    /// 1 for configuration and I/O problems, 2 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        use stmala_core::Error as E;
        match self {
            HarnessError::Config(_) | HarnessError::Io(_) => 1,
            HarnessError::Core(
                E::Io(_) | E::Csv(_) | E::Parse(_) | E::Shape(_) | E::InvalidParameter(_),
            ) => 1,
            HarnessError::Core(_) => 2,
        }
    }
}
