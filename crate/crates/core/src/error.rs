use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("alpha[{index}] = {value} is outside the open interval (0, 1)")]
    AlphaDomain { index: usize, value: f64 },

    #[error("peak amplitude must be positive and finite, got {0}")]
    Amplitude(f64),

    #[error("tolerance must be positive, got {0}")]
    Tolerance(f64),

    #[error("{which} is numerically rank deficient (rank {rank}, need {needed})")]
    RankDeficient {
        which: &'static str,
        rank: usize,
        needed: usize,
    },

    #[error("channel dimensions nT={nt}, nB={nb}, nE={ne} are neither Case I nor Case II")]
    UnsupportedCase { nt: usize, nb: usize, ne: usize },

    #[error("operation requires {expected} but the channel is {found}")]
    CaseMismatch {
        expected: &'static str,
        found: &'static str,
    },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("channel matrix {0} has a negative or non-finite entry")]
    InvalidChannel(&'static str),

    #[error("index set {0} does not select a nonsingular submatrix of Bob's channel")]
    SingularIndexSet(String),

    #[error("no admissible index set: {0}")]
    NoIndexSet(String),

    #[error("{count} index sets exceed the enumeration cap of {cap}")]
    TooManyIndexSets { count: u128, cap: usize },

    #[error("non-finite values in {0}")]
    NonFinite(&'static str),

    #[error("zero-forcing is infeasible: {0}")]
    ZfInfeasible(&'static str),

    #[error("zero-forcing is infeasible for all {index_sets} index sets; use the least-squares relaxation")]
    AllZfInfeasible { index_sets: usize },

    #[error("convex subproblem failed at iteration {iteration}: {reason}")]
    Subproblem { iteration: usize, reason: String },
}
