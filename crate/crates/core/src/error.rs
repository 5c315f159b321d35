use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A constructor or operation received a value outside its domain.
    #[error("invalid {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("prefill length {l} outside [0, {c_max}]")]
    PrefillLengthOutOfRange { l: f64, c_max: f64 },

    #[error("prefix index {k} outside [1, {len}]")]
    PrefixIndexOutOfRange { k: usize, len: usize },

    #[error("KV cache size per token overflows 128 bits")]
    KvSizeOverflow,

    /// Streaming demand not met within the integration horizon.
    #[error("streaming {g_tokens} tokens did not finish within the {horizon_s} s horizon")]
    StreamingHorizon { g_tokens: u64, horizon_s: f64 },

    #[error("exhaustive search: {0}")]
    Exhaustive(String),

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
