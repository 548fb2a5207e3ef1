use thiserror::Error;

/// Errors surfaced by the engine and its building blocks.
#[derive(Debug, Error)]
pub enum CoreError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("genome parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("cannot compile genome {genome}: {message}")]
    Compile { genome: u64, message: String },

    #[error("non-finite input value for input id {input}")]
    NonFiniteInput { input: u32 },
}
