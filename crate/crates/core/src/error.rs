use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("duplicate note id `{0}`")]
    DuplicateNote(String),
    #[error("unknown note id `{0}`")]
    UnknownNote(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("lexicon error: {0}")]
    Lexicon(String),
    #[error("missing lexicon category `{0}`")]
    MissingLexicon(String),
    #[error("need both label classes present")]
    SingleClass,
    #[error("empty input: {0}")]
    Empty(&'static str),
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("design is rank deficient or too small: {0}")]
    Design(String),
    #[error("optimizer did not converge after {iterations} iterations (gradient norm {gradient_norm:e})")]
    NotConverged { iterations: usize, gradient_norm: f64 },
    #[error("all bootstrap resamples were degenerate")]
    DegenerateBootstrap,
    #[error("every request to the chat endpoint failed")]
    AllRequestsFailed,
    #[error("invalid configuration: {0}")]
    Config(String),
}
