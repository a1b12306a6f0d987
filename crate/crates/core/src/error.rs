use thiserror::Error;

/// Errors produced by the toolkit.
#[derive(Error, Debug)]
pub enum Error {
    #[error("modulus must be at least 2, got {0}")]
    InvalidModulus(u64),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("assignment has {got} bits but the circuit has arity {expected}")]
    InvalidAssignment { expected: usize, got: usize },

    #[error("malformed circuit: {0}")]
    MalformedCircuit(String),

    #[error("instance too large: {0}")]
    TooLarge(String),

    #[error("invalid block: {0}")]
    InvalidBlock(String),

    #[error("circuit is not rigid")]
    NotRigid,

    #[error("circuit is not symmetric under the given generators")]
    NotSymmetric,

    #[error("modulus {m} does not have both {p} and {q} as prime factors")]
    IncompatibleModulus { m: u64, p: u64, q: u64 },

    #[error("unsupported modulus {0}: at least two distinct prime factors are required")]
    UnsupportedModulus(u64),

    #[error("precondition failed: {0}")]
    PreconditionFailed(String),
}

pub type Result<T> = std::result::Result<T, Error>;
