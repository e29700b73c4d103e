use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid alphabet: {0}")]
    InvalidAlphabet(String),

    #[error("alphabet mismatch: {0}")]
    AlphabetMismatch(String),

    #[error("unknown symbol {symbol:?} in record {record:?} (line {line})")]
    UnknownSymbol {
        symbol: char,
        record: String,
        line: usize,
    },

    #[error("malformed FASTA at line {line}: {reason}")]
    MalformedFasta { line: usize, reason: String },

    #[error("invalid substitution matrix: {0}")]
    InvalidMatrix(String),

    #[error("invalid alignment: {0}")]
    InvalidAlignment(String),

    #[error("edit {step} out of range: {reason}")]
    EditOutOfRange { step: usize, reason: String },

    #[error("time {0} outside the allowed range")]
    TimeOutOfRange(f64),

    #[error("self-substitution at position {0} is not a transition")]
    SelfSubstitution(usize),

    #[error("target edit {0} has zero model rate")]
    ZeroRate(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("non-finite loss at step {0}")]
    NonFiniteLoss(usize),

    #[error("checkpoint checksum mismatch (expected {expected:016x}, found {found:016x})")]
    ChecksumMismatch { expected: u64, found: u64 },

    #[error("unsupported checkpoint version {found} (expected {expected})")]
    VersionMismatch { expected: u32, found: u32 },

    #[error("corrupt checkpoint: {0}")]
    CorruptCheckpoint(String),

    #[error("divergent: {0}")]
    Divergent(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("empty input: {0}")]
    Empty(String),

    #[error("zero total rate at t = {0}")]
    ZeroTotalRate(f64),

    #[error(
        "target of {target} edits unreachable; closest achieved {achieved:.3} at clock {clock}"
    )]
    Unreachable {
        target: f64,
        achieved: f64,
        clock: f64,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
