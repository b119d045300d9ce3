use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("key size must be an even number of bits >= 16, got {0}")]
    KeySize(u32),
    #[error("prime search exhausted after {0} candidates")]
    PrimeSearch(usize),
    #[error("plaintext is outside Z_N")]
    PlaintextRange,
    #[error("blinding value is not a unit modulo N")]
    NotCoprime,
    #[error("ciphertext is not a unit modulo N^2")]
    NotInvertible,
    #[error("fixed-point overflow: {0}")]
    Overflow(String),
    #[error("scale mismatch: {left} vs {right}")]
    ScaleMismatch { left: u32, right: u32 },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("training diverged: {0}")]
    Divergence(String),
    #[error("AUC needs at least one positive and one negative label")]
    SingleClass,
    #[error("cross-validation fold {0} lacks one of the two classes")]
    DegenerateFold(usize),
    #[error("no convergence: {0}")]
    NoConvergence(String),
    #[error("out-of-order message: expected {expected}, got {got}")]
    OutOfOrder { expected: String, got: String },
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error("session aborted by peer: {0}")]
    Aborted(String),
    #[error("handshake mismatch: {0}")]
    Handshake(String),
    #[error("malformed frame: {0}")]
    Frame(String),
    #[error("corpus error: {0}")]
    Corpus(String),
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}
