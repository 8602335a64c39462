use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// Two fields or operators were combined over different grids.
    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    /// A parameter was out of its documented range.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// An operation that materialises oscillation at scale `h` was asked
    /// to run on a grid that cannot resolve it (`h < 4 * max spacing`).
    #[error("unresolved scale: h = {h} but grid spacing requires h >= {min_h}")]
    UnresolvedScale { h: f64, min_h: f64 },

    /// The assembled linear system was singular or numerically unusable.
    #[error("singular system: {0}")]
    SingularSystem(String),

    /// An extrapolation or fit did not behave as required.
    #[error("extrapolation failure: {0}")]
    ExtrapolationFailure(String),

    /// Recovery of a quantity that the data cannot determine.
    #[error("unrecoverable mode: {0}")]
    UnrecoverableMode(String),

    /// Scenario file could not be read or validated.
    #[error("scenario error: {0}")]
    Scenario(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
