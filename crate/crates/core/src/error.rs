use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A parameter or input lies outside the domain of the operation.
    #[error("domain error: {name}: {reason}")]
    Domain { name: String, reason: String },

    #[error("numeric instability: {0}")]
    NumericInstability(String),

    /// The spectral chain is too shallow for the small-frequency closure.
    #[error("depth too small: |xi_(K+1)| = {xi_next} exceeds {limit}; increase depth")]
    DepthTooSmall { xi_next: f64, limit: f64 },

    #[error("scale guard: {requested} stored values exceed the cap of {cap}")]
    ScaleGuard { requested: u128, cap: u128 },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    pub fn domain(name: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Domain {
            name: name.into(),
            reason: reason.into(),
        }
    }

    /// True for errors caused by invalid user input rather than I/O.
    pub fn is_domain(&self) -> bool {
        matches!(
            self,
            Error::Domain { .. } | Error::DepthTooSmall { .. } | Error::ScaleGuard { .. } | Error::Parse(_)
        )
    }
}
