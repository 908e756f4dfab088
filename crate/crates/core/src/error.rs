use thiserror::Error;

/// Failures of the distribution-function kernel.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpecialError {
    #[error("invalid beta shapes a={a}, b={b}: both must be positive and finite")]
    Shape { a: f64, b: f64 },
    #[error("domain error: {what} (got {value})")]
    Domain { what: &'static str, value: f64 },
    #[error("{what} did not converge after {iterations} iterations")]
    NoConvergence {
        what: &'static str,
        iterations: usize,
    },
}

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Special(#[from] SpecialError),

    #[error("invalid data: {0}")]
    InvalidData(String),

    #[error("column {column} ({name}) is constant and cannot be standardized")]
    ConstantColumn { column: usize, name: String },

    #[error("covariate {column} is (numerically) collinear with the current subset")]
    Collinear { column: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("{q} covariates exceed the all-subsets cap of {cap}; pass an explicit subset universe (e.g. a stepwise-selected pool)")]
    TooManyCovariates { q: usize, cap: usize },

    #[error("query outside the false-positive table ({0}); run the null simulation instead")]
    OutsideTable(String),

    #[error("non-numeric value {value:?} at row {row}, column {column}")]
    Parse {
        row: usize,
        column: String,
        value: String,
    },

    #[error("missing value at row {row}, column {column}")]
    Missing { row: usize, column: String },

    #[error("{0} did not converge")]
    NoConvergence(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Input problems (bad files, bad arguments) as opposed to numerical failures.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::InvalidData(_)
                | Error::ConstantColumn { .. }
                | Error::Domain(_)
                | Error::TooManyCovariates { .. }
                | Error::OutsideTable(_)
                | Error::Parse { .. }
                | Error::Missing { .. }
                | Error::Io(_)
                | Error::Csv(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
