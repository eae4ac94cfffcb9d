//! ODMR lineshapes: models, Faddeeva kernel, fitting and sensitivity.

pub mod faddeeva;
pub mod fit;
pub mod profiles;
pub mod sensitivity;
pub mod spectrum;

pub use faddeeva::faddeeva;
pub use fit::{fit_line, fit_line_with, FitOptions, LineFit, LineModel};
pub use profiles::{
    broadening_coordinate, fwhm_voigt, gaussian_model, lorentzian_model, voigt_contrast_model, voigt_derivative_model,
    voigt_model,
};
pub use sensitivity::{sensitivity, SensitivityReport};
pub use spectrum::Spectrum;
