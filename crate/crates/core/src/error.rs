use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("basis index {index} out of range for a {n}-particle register")]
    IndexOutOfRange { index: usize, n: usize },

    #[error("particle label {label} out of range 1..={n}")]
    LabelOutOfRange { label: usize, n: usize },

    #[error("register sizes differ: {left} vs {right} particles")]
    DimensionMismatch { left: usize, right: usize },

    #[error("register of {0} particles exceeds the dense cap of {max}", max = crate::statevec::MAX_PARTICLES)]
    TooManyParticles(usize),

    #[error("amplitude vector of length {0} is not a nonzero power of two")]
    BadLength(usize),

    #[error("non-finite amplitude in state")]
    NonFinite,

    #[error("cannot normalize a zero vector")]
    ZeroNorm,

    #[error("matrix is not unitary (deviation {0:e})")]
    NotUnitary(f64),

    #[error("invalid density matrix: {0}")]
    InvalidDensity(String),

    #[error("invalid qubit: {0}")]
    InvalidQubit(String),

    #[error("angle {name} = {value} outside {range}")]
    AngleOutOfRange {
        name: &'static str,
        value: f64,
        range: &'static str,
    },

    #[error("measured particles must be distinct (got {0} twice)")]
    RepeatedParticle(usize),

    #[error("invalid projective basis: {0}")]
    InvalidBasis(String),

    #[error("every outcome has probability below 1e-14; state is corrupted")]
    NoViableOutcome,

    #[error("outcome {0} has probability below 1e-14 on this state")]
    ImpossibleOutcome(String),

    #[error("chain protocol needs at least 2 copies, got {0}")]
    ChainTooShort(usize),

    #[error("unknown equation id {0}; expected one of 3, 6, 9, 14, 16, 19")]
    UnknownEquation(u32),

    #[error("correction table: {0}")]
    Table(String),

    #[error("incomplete transcript: {0}")]
    IncompleteTranscript(String),

    #[error("invalid trial configuration: {0}")]
    InvalidConfig(String),
}
