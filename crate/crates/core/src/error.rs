use thiserror::Error;

/// Every failure the library reports. Load-time validation problems and
/// run-time problems share one enum so the CLI can map them to exit codes.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("parse error: {0}")]
    Parse(String),

    #[error("symbol {symbol:?} is not in the input alphabet")]
    SymbolNotInAlphabet { symbol: char },

    #[error("invalid machine: {0}")]
    InvalidSpec(String),

    #[error("role violation: {0}")]
    RoleViolation(String),

    #[error("a CTC bit was supplied to a machine without CTC-indexed transitions")]
    UnexpectedBit,

    #[error("machine has CTC-indexed transitions but no bit was supplied")]
    MissingBit,

    #[error("postselection mass is zero on input {word:?}")]
    PostselectionMassZero { word: String },

    #[error("machines cannot be combined: {0}")]
    Incompatible(String),

    #[error("determinism violated: {0}")]
    Nondeterministic(String),

    #[error("branching {0} exceeds 2")]
    BranchingExceeded(u64),

    #[error("probabilistic branch has nonhalting mass; only deterministic nonhalting branches have defined semantics")]
    ProbabilisticNonHalting,

    #[error("pushdown run blocked before consuming the end-marker (state {state:?}, position {position})")]
    Blocked { state: String, position: usize },

    #[error("hop delay k = {0} must exceed 3")]
    DelayTooShort(usize),

    #[error("profile has a nonhalting branch; use the infinite-branch analysis")]
    NonHaltingProfile,

    #[error("{0}")]
    Usage(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
