use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("hypothesis violated: {0}")]
    Hypothesis(String),

    #[error("point ({x}, {y}) lies outside the transported region")]
    OutsideRegion { x: f64, y: f64 },

    #[error("problem size {entries} exceeds the cap of {cap} cost entries")]
    SizeCap { entries: usize, cap: usize },

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for reports that flag a broken modelling assumption rather than a failed computation.
    pub fn is_hypothesis(&self) -> bool {
        matches!(self, Error::Hypothesis(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
