use std::io;

#[derive(Debug, thiserror::Error)]
pub enum ToolError {
    /// Bad configuration key, value or combination.
    #[error("config: {0}")]
    Config(String),
    /// A file that does not follow its format.
    #[error("format: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Core(#[from] ensemble_cma::Error),
}

impl ToolError {
    /// Process exit code: 1 for configuration errors, 2 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            ToolError::Config(_) => 1,
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, ToolError>;
