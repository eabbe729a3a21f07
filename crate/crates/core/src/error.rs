use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("point {0} is not a position in [0, 1)")]
    InvalidPoint(f64),

    #[error("cyclic betweenness needs three distinct points, got {0}, {1}, {2}")]
    NotDistinct(f64, f64, f64),

    #[error("successor needs at least two points, got {0}")]
    TooFewPoints(usize),

    #[error("point {0} is not a member of the set")]
    NotAMember(f64),

    #[error("sample size {0} must be odd (majority votes are taken over odd counts)")]
    EvenSampleSize(u64),

    #[error("probability {0} is outside [0, 1]")]
    InvalidProbability(f64),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("the expansion at zero has no C(2k+1,k) term for n = 1 (k = 0)")]
    NoExpansionForOne,

    /// `best` is `None` when the first candidate already lies beyond the cap.
    #[error("find_N exceeded its cap of {cap}{}", match best {
        Some((n, v)) => format!("; best candidate {n} violated the inequality by {v:e}"),
        None => "; the first candidate already exceeds it".into(),
    })]
    SearchCapExceeded { cap: u64, best: Option<(u64, f64)> },

    #[error("invalid learning problem: {0}")]
    InvalidProblem(String),

    #[error("arc has zero measure")]
    ZeroMeasure,

    #[error("sample is empty")]
    EmptySample,

    #[error("labelled prefix has {have} points, stage {stage} needs {need}")]
    PrefixTooShort { stage: usize, have: usize, need: u64 },
}

pub type Result<T> = std::result::Result<T, Error>;
