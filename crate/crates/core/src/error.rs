use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    // quantum substrate
    #[error("amplitude vector of length {0} is not 2^k for k >= 1")]
    BadAmplitudeLength(usize),
    #[error("state is not normalized (norm^2 = {0})")]
    NotNormalized(f64),
    #[error("qubit index {index} out of range for a {num_qubits}-qubit register")]
    QubitIndex { index: usize, num_qubits: usize },
    #[error("duplicate qubit index {0}")]
    DuplicateQubit(usize),
    #[error("matrix dimension {0} is not a power of two")]
    NotPowerOfTwo(usize),
    #[error("matrix has {entries} entries, expected {dim}x{dim}")]
    MatrixShape { dim: usize, entries: usize },
    #[error("matrix is not unitary (max |UU* - I| = {0:e})")]
    NonUnitary(f64),
    #[error("unitary of dimension {dim} does not act on {targets} qubit(s)")]
    DimensionMismatch { dim: usize, targets: usize },
    #[error("register of {0} qubits exceeds the 12-qubit cap")]
    RegisterTooLarge(usize),
    #[error("keep set must name at least one qubit")]
    EmptyKeepSet,
    #[error("density matrix violates {0}")]
    InvalidDensity(&'static str),
    #[error("qubit {0} does not exist")]
    UnknownQubit(usize),

    // circuits and distributions
    #[error("circuit label `{0}` is used twice")]
    DuplicateLabel(String),
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("variable `{0}` takes a value that is not a bit")]
    NotABit(String),
    #[error("probability table is invalid: {0}")]
    InvalidDistribution(String),
    #[error("conditioning event has zero probability")]
    ZeroProbabilityEvent,
    #[error("probability {0} outside [0, 1]")]
    ProbabilityRange(f64),
    #[error("information quantity must be non-negative, got {0}")]
    NegativeInformation(f64),
    #[error("no samples")]
    EmptySamples,

    // randomness
    #[error("unknown ledger stage `{0}`")]
    UnknownStage(String),
    #[error("unknown party `{0}`")]
    UnknownParty(String),
    #[error("baseline drew no bits for a compared quantity")]
    EmptyBaseline,
    #[error("raw-qubit counts differ: block mode {block}, baseline {baseline}")]
    RawQubitMismatch { block: u64, baseline: u64 },

    // protocol
    #[error("invalid protocol configuration: {0}")]
    InvalidConfig(String),
    #[error("keys differ in length ({alice} vs {bob})")]
    LengthMismatch { alice: usize, bob: usize },
    #[error("key of {len} bits is too short (need at least {min})")]
    KeyTooShort { len: usize, min: usize },
    #[error("expected {expected} qubits, got {got}")]
    QubitCount { expected: usize, got: usize },

    // attacks
    #[error("invalid attack: {0}")]
    InvalidAttack(String),
    #[error("reduction check precondition: {0}")]
    ReductionPrecondition(String),
    #[error("kept register was already measured")]
    AlreadyMeasured,
    #[error("matrix file: {0}")]
    MatrixFile(String),

    // post-processing
    #[error("QBER estimate {0} is outside [0, 0.5)")]
    QberRange(f64),
    #[error("sifted key is empty")]
    EmptyKey,
}
