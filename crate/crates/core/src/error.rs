use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("transition row {row} sums to {sum} (expected 1)")]
    NonStochasticRow { row: usize, sum: f64 },

    #[error("transition row {row} has invalid entry {value}")]
    InvalidTransition { row: usize, value: f64 },

    #[error("chain has no unique stationary distribution")]
    ReducibleChain,

    #[error("invalid dither rate {0} (must lie in [0, 1/2))")]
    InvalidRate(f64),

    #[error("alphabet size {0} outside 2..=256")]
    InvalidAlphabet(usize),

    #[error("symbol {symbol} at position {position} is not in an alphabet of size {size}")]
    InvalidSymbol {
        position: usize,
        symbol: u8,
        size: usize,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("block length {n} exceeds the enumeration cap {cap}")]
    EnumerationCapExceeded { n: usize, cap: usize },

    #[error("codebook construction failed: built {achieved} of {requested} codebooks")]
    ConstructionFailed { requested: usize, achieved: usize },

    #[error("reference model assigns zero probability to a visited block")]
    ZeroQProbability,

    #[error("computation budget exceeded: {0}")]
    BudgetExceeded(String),

    #[error("sequence too short: need {needed} symbols, got {got}")]
    SequenceTooShort { needed: usize, got: usize },

    #[error("layout mismatch: {0}")]
    LayoutMismatch(String),

    #[error("pair divergence {divergence} lies in the gray zone (0, {delta_crit})")]
    GrayZonePair { divergence: f64, delta_crit: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
