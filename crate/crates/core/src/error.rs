use thiserror::Error;

/// Error type shared by all modules in this crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("zero-probability token")]
    ZeroProbabilityToken,

    #[error("output length exceeded")]
    OutputLengthExceeded,

    #[error("vocabulary mismatch: {0}")]
    VocabMismatch(String),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("code too short for soundness target")]
    CodeTooShort,

    #[error("overlong block: input length {input} exceeds code length {code_len}")]
    OverlongBlock { input: usize, code_len: usize },

    #[error("empty input")]
    EmptyInput,

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("malformed file: {0}")]
    Malformed(String),
}
