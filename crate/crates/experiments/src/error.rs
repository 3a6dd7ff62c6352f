use thiserror::Error;

#[derive(Debug, Error)]
pub enum ExpError {
    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Core(#[from] comexp_core::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl ExpError {
    /// Process exit code: 2 for bad configuration, 3 when an exhaustive
    /// oracle refuses the instance size, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) | Self::Json(_) => 2,
            Self::Core(comexp_core::Error::SizeGuard { .. }) => 3,
            Self::Core(
                comexp_core::Error::InvalidInstance(_)
                | comexp_core::Error::InvalidParameter(_)
                | comexp_core::Error::Unsupported(_),
            ) => 2,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, ExpError>;
