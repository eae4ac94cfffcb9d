use thiserror::Error;

use crate::lineshape::LineFit;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("matrix is not symmetric (max asymmetry {asymmetry:.3e})")]
    NonSymmetric { asymmetry: f64 },

    #[error("cubic discriminant violated: arccos argument {argument} outside [-1, 1]")]
    DiscriminantViolation { argument: f64 },

    #[error("resonances inconsistent with D and E: effective field squared {eff_sq_mhz2:.6e} MHz^2")]
    InconsistentResonances { eff_sq_mhz2: f64 },

    #[error("cos^2(theta) = {value} outside [0, 1]")]
    AngleOutOfRange { value: f64 },

    #[error("field is zero; the cone angle is undefined")]
    ZeroField,

    #[error("resonance splitting is smaller than the strain splitting 2E")]
    SplittingBelowStrain,

    #[error("expected {expected} hyperfine lines, got {got}")]
    WrongLineCount { expected: usize, got: usize },

    #[error("spectral lines {first} MHz and {second} MHz coincide; pairing is ambiguous")]
    DuplicateLines { first: f64, second: f64 },

    #[error("normal matrix is singular (condition number {condition:.3e})")]
    SingularNormalMatrix { condition: f64 },

    #[error("cone system has no direction solution (estimator vanished)")]
    DegenerateSolution,

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("Faddeeva function evaluated below the real axis (Im z = {im})")]
    DomainError { im: f64 },

    #[error("invalid spectrum: {0}")]
    InvalidSpectrum(String),

    #[error("no resonance dip found in spectrum")]
    NoDipFound,

    #[error("line fit did not converge after {} iterations", best.iterations)]
    FitNotConverged { best: Box<LineFit> },

    #[error("numerical baseline did not converge after {iterations} iterations (gradient norm {gradient_norm:.3e})")]
    BaselineNotConverged { iterations: usize, gradient_norm: f64 },

    #[error("failed to read spectrum: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for failures of the lineshape fitting stage.
    pub fn is_fit_error(&self) -> bool {
        matches!(
            self,
            Error::NoDipFound | Error::FitNotConverged { .. } | Error::InvalidSpectrum(_) | Error::Csv(_)
        )
    }
}
