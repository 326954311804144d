use alloc::string::String;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("challenge prefix of length {prefix} exceeds register length {register}")]
    PrefixTooLong { prefix: usize, register: usize },
    #[error("a response needs at least one challenge")]
    EmptyPrefix,
    #[error("length mismatch: expected {expected} bits, found {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("round {round} outside 1..={rounds}")]
    RoundOutOfRange { round: usize, rounds: usize },
    #[error("round count must be at least 1")]
    ZeroRounds,
    #[error("secret key must hold at least {min} bytes, got {found}")]
    KeyTooShort { min: usize, found: usize },
    #[error("probability {0} outside [0, 1]")]
    InvalidProbability(f64),
    #[error("tolerance {x} exceeds round count {n}")]
    ToleranceOutOfRange { x: usize, n: usize },
    #[error("pattern threshold must be at least 1")]
    ZeroThreshold,
    #[error("tree shape depth {depth} does not divide {rounds} rounds")]
    TreeShape { depth: usize, rounds: usize },
    #[error("tree depth {0} is too large to materialize")]
    TreeTooDeep(usize),
    #[error("unknown protocol id {0:?}")]
    UnknownProtocol(String),
    #[error("unknown strategy id {0:?}")]
    UnknownStrategy(String),
    #[error("unknown {kind} {name:?}")]
    UnknownName { kind: &'static str, name: String },
    #[error("{strategy} is not defined for protocol {protocol}")]
    Unsupported {
        strategy: &'static str,
        protocol: String,
    },
}

pub type Result<T, E = Error> = core::result::Result<T, E>;

pub(crate) fn check_probability(p: f64) -> Result<f64> {
    if (0.0..=1.0).contains(&p) {
        Ok(p)
    } else {
        Err(Error::InvalidProbability(p))
    }
}
