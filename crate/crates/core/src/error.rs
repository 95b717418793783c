use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("characteristic function overflow at u = {re} + {im}i")]
    Overflow { re: f64, im: f64 },

    #[error("quadrature tail estimate {tail:.3e} exceeds tolerance {tol:.3e} (integrated up to u = {u_end})")]
    Truncation { tail: f64, tol: f64, u_end: f64 },

    #[error("sensitivity to {component} failed: {source}")]
    Gradient {
        component: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("calibration failed: {0}")]
    Calibration(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("malformed data: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for failures caused by the numbers themselves rather than by
    /// bad files or settings.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Overflow { .. }
                | Error::Truncation { .. }
                | Error::Gradient { .. }
                | Error::Numerical(_)
                | Error::Calibration(_)
        )
    }
}
