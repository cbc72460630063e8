use thiserror::Error;

/// Errors raised by the model, the optimizers and the file formats.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("elapsed time {elapsed} min is below the guard {guard} min")]
    ElapsedTimeNonPositive { elapsed: f64, guard: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("axis {axis} modulus {modulus:e} below floor {floor:e}")]
    DegenerateAxis { axis: usize, modulus: f64, floor: f64 },

    #[error("line search stalled after {shrinks} shrinks at iteration {iteration}")]
    LineSearchStalled { iteration: usize, shrinks: usize },

    #[error("non-finite iterate at iteration {iteration}: {iterate:?}")]
    NonFiniteIterate { iteration: usize, iterate: [f64; 3] },

    #[error("epoch {iteration} exceeded its inner budget of {budget} steps")]
    EpochBudgetExceeded { iteration: usize, budget: u64 },

    #[error("path {path}: {source}")]
    Path {
        path: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("matrix asymmetry {defect:e} exceeds tolerance")]
    AsymmetricInput { defect: f64 },

    #[error("sampled Hessian at {point:?} is not positive definite (min eigenvalue {min_eig:e})")]
    NotLocallyConvex { point: [f64; 3], min_eig: f64 },

    #[error("need at least 2 samples, got {0}")]
    TooFewSamples(usize),

    #[error("required {required} sensors but only {available} are available")]
    PoolExhausted { required: usize, available: usize },

    #[error("line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("config: {0}")]
    Config(String),

    #[error("io: {0}")]
    Io(String),
}

impl Error {
    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::InvalidParameter(_) => 2,
            Error::Parse { .. } | Error::Io(_) | Error::TooFewSamples(_) => 3,
            Error::Path { source, .. } => source.exit_code(),
            _ => 4,
        }
    }

    pub(crate) fn in_path(self, path: usize) -> Error {
        Error::Path {
            path,
            source: Box::new(self),
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_by_kind() {
        assert_eq!(Error::Config("x".into()).exit_code(), 2);
        assert_eq!(Error::Io("x".into()).exit_code(), 3);
        assert_eq!(Error::EpochBudgetExceeded { iteration: 1, budget: 2 }.exit_code(), 4);
        // A path wrapper keeps the code of what it wraps.
        assert_eq!(Error::Config("x".into()).in_path(3).exit_code(), 2);
    }
}
