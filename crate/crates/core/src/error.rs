use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// Queue parameters violate `0 < arrival_rate < service_rate`.
    #[error("invalid queue parameters: {0}")]
    Params(String),

    /// A scalar argument fell outside its admissible range.
    #[error("{name} = {value} is out of range: {expected}")]
    Domain {
        name: &'static str,
        value: f64,
        expected: &'static str,
    },

    /// The operation is only defined in a particular equilibrium regime.
    #[error("regime error: {0}")]
    Regime(String),

    #[error("invalid configuration: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn domain(name: &'static str, value: f64, expected: &'static str) -> Self {
        Error::Domain {
            name,
            value,
            expected,
        }
    }
}
