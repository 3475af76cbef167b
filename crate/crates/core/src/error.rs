use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("text contains no tokens")]
    EmptyText,

    #[error("document has zero length")]
    ZeroLengthDocument,

    #[error("invalid document counts: {0}")]
    InvalidCounts(String),

    #[error("vocabulary is empty")]
    EmptyVocabulary,

    #[error("duplicate token {0:?} in vocabulary")]
    DuplicateToken(String),

    #[error("models or documents are defined over different vocabularies")]
    VocabularyMismatch,

    #[error("invalid probability vector: {0}")]
    InvalidProbabilities(String),

    #[error("mean-document length must be positive, got {0}")]
    NonPositiveLength(f64),

    #[error("sample size must be at least 1")]
    EmptySample,

    #[error("mixture weights must be nonnegative and sum to 1 (sum = {0})")]
    WeightNormalization(f64),

    #[error("fusion weight must lie in [0, 1], got {0}")]
    InvalidFusionWeight(f64),

    #[error("smoothing weight must lie in [0, 1), got {0}")]
    InvalidSmoothing(f64),

    #[error(
        "cross entropy CE({left} || {right}) is infinite: {left} puts mass on tokens {right} never emits; \
         enable smoothing (smoothing_mu > 0)"
    )]
    InfiniteCrossEntropy { left: String, right: String },

    #[error("shift constant needs at least one base document")]
    NoBaseDocuments,

    #[error("an auction needs at least two advertisers, got {0}")]
    TooFewAdvertisers(usize),

    #[error("duplicate advertiser id {0}")]
    DuplicateAdvertiser(u32),

    #[error("unknown advertiser id {0}")]
    UnknownAdvertiser(u32),

    #[error("winner and runner-up must differ (both {0})")]
    SameWinnerAndSecond(u32),

    #[error("bid profile has {got} bids for {expected} advertisers")]
    BidCountMismatch { expected: usize, got: usize },

    #[error("bid for advertiser {id} must be finite and nonnegative, got {bid}")]
    InvalidBid { id: u32, bid: f64 },

    #[error("invalid bid grid for advertiser {id}: {reason}")]
    InvalidGrid { id: u32, reason: String },

    #[error("epsilon must lie in (0, 0.5), got {0}")]
    EpsilonOutOfRange(f64),

    #[error("invalid sweep: {0}")]
    InvalidSweep(String),

    #[error("schema error at {path}: {message}")]
    Schema { path: String, message: String },

    #[error("invalid value for {field}: {message}")]
    Validation { field: String, message: String },
}

impl Error {
    /// True for errors caused by malformed or out-of-range user input, as
    /// opposed to inputs that are well-formed but have no defined outcome.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Schema { .. }
                | Error::Validation { .. }
                | Error::InvalidFusionWeight(_)
                | Error::InvalidSmoothing(_)
                | Error::InvalidBid { .. }
                | Error::TooFewAdvertisers(_)
                | Error::DuplicateAdvertiser(_)
                | Error::UnknownAdvertiser(_)
                | Error::EpsilonOutOfRange(_)
                | Error::InvalidSweep(_)
                | Error::InvalidGrid { .. }
                | Error::BidCountMismatch { .. }
                | Error::EmptyText
        )
    }
}
