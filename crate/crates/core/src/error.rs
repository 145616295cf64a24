use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("{func}: argument {value} outside domain ({domain})")]
    Domain {
        func: &'static str,
        value: f64,
        domain: &'static str,
    },

    #[error("{func}: result overflows f64 for argument {value}")]
    Overflow { func: &'static str, value: f64 },

    #[error("{func}: did not converge within {limit} iterations")]
    NoConvergence { func: &'static str, limit: usize },

    #[error("quadrature did not converge after {subdivisions} subdivisions (value {value:e}, error estimate {err_est:e})")]
    Quadrature {
        subdivisions: usize,
        value: f64,
        err_est: f64,
    },

    #[error("degenerate configuration: {0}")]
    Degenerate(String),

    #[error("sample size {got} below the minimum of {min}")]
    SampleSize { got: usize, min: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("grid point {index} (value {value}) failed: {source}")]
    GridPoint {
        index: usize,
        value: f64,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    /// True when the error comes from a numerical routine rather than bad input.
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::NoConvergence { .. } | Error::Quadrature { .. } | Error::Overflow { .. } => true,
            Error::GridPoint { source, .. } => source.is_numerical(),
            _ => false,
        }
    }
}
