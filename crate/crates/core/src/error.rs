use thiserror::Error;

/// Errors raised by the simulator and its analysis routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("self-loop at vertex {0}")]
    SelfLoop(usize),
    #[error("duplicate edge ({0}, {1})")]
    DuplicateEdge(usize, usize),
    #[error("bad index {index} (valid range 0..{n})")]
    BadIndex { index: usize, n: usize },
    #[error("edge weight must be positive and finite")]
    NonPositiveWeight,
    #[error("graph not connected")]
    Disconnected,
    #[error("h must be positive")]
    NonPositiveGain,
    #[error("matrix not symmetric")]
    NotSymmetric,
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("h grid must be strictly ascending and positive")]
    BadGainGrid,
    #[error("theta out of range")]
    ThetaOutOfRange,
    #[error("load exceeds capacity")]
    LoadExceedsCapacity,
    #[error("numerical divergence at step {step}")]
    NumericalDivergence { step: u64 },
    #[error("explicit Euler step {dt} is unstable (must be below {limit})")]
    UnstableStep { dt: f64, limit: f64 },
    #[error("estimate below load at agent {agent}")]
    EstimateBelowLoad { agent: usize },
    #[error("consensus in progress")]
    ConsensusInProgress,
    #[error("insufficient history: need {needed} samples, have {available}")]
    InsufficientHistory { needed: usize, available: usize },
    #[error("hankel input must have odd length, got {0}")]
    HankelLength(usize),
    #[error("no defective Hankel within 2N+1 steps")]
    NoDefect,
    #[error("kernel normalization failed")]
    KernelNormalization,
    #[error("degenerate kernel denominator")]
    DegenerateDenominator,
    #[error("locality violation: message from {from} to non-neighbor {to}")]
    LocalityViolation { from: usize, to: usize },
    #[error("empty input")]
    Empty,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    /// `line` is 1-based; 0 marks a problem with the file as a whole.
    #[error("{}", describe_parse(*line, message))]
    Parse { line: usize, message: String },
}

fn describe_parse(line: usize, message: &str) -> String {
    match line {
        0 => message.to_owned(),
        l => format!("line {l}: {message}"),
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
