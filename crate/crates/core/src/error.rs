use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("dimension mismatch: expected {expected} values, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("parameter `{name}` = {value} is out of range ({expected})")]
    OutOfRange {
        name: &'static str,
        value: f64,
        expected: &'static str,
    },

    #[error("kernel is singular at the origin")]
    SingularKernel,

    #[error("field has nonzero mean {mean:e}; operation requires zero-mean data")]
    NonzeroMean { mean: f64 },

    #[error("singular vortex configuration: vortices {i} and {j} coincide")]
    SingularConfiguration { i: usize, j: usize },

    #[error("vortex {index} has zero intensity")]
    ZeroIntensity { index: usize },

    #[error("vortex near-collapse: minimum pairwise distance {min_distance:e}")]
    NearCollapse { min_distance: f64 },

    #[error("vortex {index} at ({x}, {y}) is outside the safe region")]
    OutsideSafeRegion { index: usize, x: f64, y: f64 },

    #[error("CFL violation: dt = {dt:e} exceeds the stable limit {limit:e}")]
    CflViolation { dt: f64, limit: f64 },

    #[error("non-finite value detected at t = {t}")]
    NumericalBlowup { t: f64 },

    #[error("{0}")]
    Invalid(String),
}
