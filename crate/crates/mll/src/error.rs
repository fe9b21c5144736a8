use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AlgebraError {
    #[error("degenerate kernel for L_{p}: singular value ratio {ratio:e} sits near the rank tolerance")]
    DegenerateKernel { p: i32, ratio: f64 },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectralError {
    #[error("carrier frequency omega must be nonzero")]
    ZeroFrequency,
    #[error("no real wavenumber on branch delta={delta} for omega={omega}")]
    InvalidBranch { omega: f64, delta: i32 },
    #[error("(omega, k) = ({omega}, {k}) is off the dispersion relation (recovered delta {delta})")]
    NotOnDispersion { omega: f64, k: f64, delta: f64 },
    #[error("branch {j} has zero eigenvalue at xi = {xi}")]
    ZeroEigenvalue { xi: f64, j: usize },
    #[error("branch index {0} outside 1..=6")]
    BadBranch(usize),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error("grid mismatch: {0}")]
    Mismatch(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvolveError {
    #[error("under-resolved at t = {t}: spectral tail {tail:e} above {threshold:e}")]
    UnderResolved { t: f64, tail: f64, threshold: f64 },
    #[error("blowup at t = {t}: sup norm {sup:e} above bound {bound:e}")]
    Blowup { t: f64, sup: f64, bound: f64 },
    #[error("step {step} exceeds maximum {max}")]
    StepTooLarge { step: f64, max: f64 },
    #[error(transparent)]
    Grid(#[from] GridError),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WkbError {
    #[error("NLS step {step} exceeds maximum {max}")]
    StepTooLarge { step: f64, max: f64 },
    #[error("NLS envelope sup {sup:e} exceeded {factor}x its initial value {initial:e} at tau = {tau}")]
    Horizon {
        tau: f64,
        sup: f64,
        initial: f64,
        factor: f64,
    },
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Algebra(#[from] AlgebraError),
}
