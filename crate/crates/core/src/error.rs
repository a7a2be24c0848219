use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("invalid video: {0}")]
    InvalidVideo(String),

    #[error("degenerate frame {frame}: every token embedding is zero")]
    DegenerateFrame { frame: usize },

    #[error("token {token} has a zero embedding and cannot be normalized")]
    ZeroEmbedding { token: usize },

    #[error("budget of {budget} tokens exceeds the {nodes} candidate nodes; raise --keep-ratio or the compression ratio")]
    BudgetExceedsNodes { budget: usize, nodes: usize },

    #[error("redundancy is undefined for {0} retained tokens (need at least 2)")]
    TooFewTokens(usize),

    #[error("scene spec: {0}")]
    SceneSpec(String),

    #[error("bad magic bytes, expected \"VTOK\"")]
    BadMagic,

    #[error("unsupported VTOK version {0}")]
    UnsupportedVersion(u16),

    #[error("truncated payload: expected {expected} bytes, found {actual}")]
    TruncatedPayload { expected: u64, actual: u64 },

    #[error("size mismatch: header declares {expected} bytes, file has {actual}")]
    SizeMismatch { expected: u64, actual: u64 },

    #[error("malformed forest export: {0}")]
    MalformedForest(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Toml(#[from] toml::de::Error),
}

impl Error {
    /// Process exit code for the command-line tool: 1 for usage and
    /// configuration problems, 2 for everything related to input data.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidConfig(_) | Error::BudgetExceedsNodes { .. } => 1,
            _ => 2,
        }
    }
}
