use thiserror::Error;

/// Errors produced by the compression library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid alphabet size {0}: need at least 2 symbols")]
    Alphabet(usize),

    #[error("invalid distribution: {0}")]
    Distribution(String),

    #[error("symbol {symbol} outside alphabet of size {size}")]
    SymbolOutOfRange { symbol: usize, size: usize },

    #[error("invalid distortion measure: {0}")]
    Distortion(String),

    #[error("embedding {0} has zero norm")]
    ZeroNormEmbedding(usize),

    #[error("codebook construction failed: {0}")]
    Codebook(String),

    #[error("symbol {0} has no codeword")]
    NotInSupport(usize),

    #[error("bit stream does not start with any codeword")]
    CorruptStream,

    #[error("predictor has no finite cost bound")]
    UnboundedPredictor,

    #[error("invalid channel: {0}")]
    Channel(String),

    #[error("erasure pattern exhausted at t = {0}")]
    PatternExhausted(u64),

    #[error("envelope window of {window} terms exceeds horizon {horizon}")]
    WindowTooLong { window: usize, horizon: usize },

    #[error("no tau up to {cap} satisfies the envelope margin")]
    TauCapExceeded { cap: u64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("no feasible grid point for D = {0}")]
    Infeasible(f64),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
