use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParameters(String),

    #[error("inconsistent exponents: {0}")]
    InconsistentExponents(String),

    #[error("negative density {0} passed to a constitutive law")]
    NegativeDensity(f64),

    #[error("index {index} out of range for stencil of length {len}")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("vacuum collapse: density {value} at cell {cell}")]
    VacuumCollapse { cell: usize, value: f64 },

    #[error("degenerate boundary closure: coefficient {coefficient:e} below {threshold:e}")]
    DegenerateClosure { coefficient: f64, threshold: f64 },

    #[error("step underflow: required dt {dt:e} below dt_min {dt_min:e} at t = {t}")]
    StepUnderflow { t: f64, dt: f64, dt_min: f64 },

    #[error("point x = {0} outside [0, 1]")]
    OutsideDomain(f64),

    #[error("mesh mismatch: {0} cells vs {1} cells")]
    MeshMismatch(usize, usize),

    #[error("invalid profile: {0}")]
    InvalidProfile(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
