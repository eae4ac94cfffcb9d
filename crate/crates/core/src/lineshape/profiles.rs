//! Normalized ODMR dip models and their width relations.

use std::f64::consts::{LN_2, PI, SQRT_2};

use num_complex::Complex64;

use super::faddeeva::w_upper;

/// FWHM of a Gaussian per unit standard deviation, `2√(2 ln 2)`.
pub const GAUSS_FWHM_PER_SIGMA: f64 = 2.354_820_045_030_949_3;

pub fn alpha_g_from_sigma(sigma: f64) -> f64 {
    GAUSS_FWHM_PER_SIGMA * sigma
}

pub fn sigma_from_alpha_g(alpha_g: f64) -> f64 {
    alpha_g / GAUSS_FWHM_PER_SIGMA
}

/// `1 − C exp(4 ln(1/2) (f − f_res)² / α_G²)`.
pub fn gaussian_model(f: f64, contrast: f64, alpha_g: f64, f_res: f64) -> f64 {
    let x = f - f_res;
    1.0 - contrast * (-4.0 * LN_2 * x * x / (alpha_g * alpha_g)).exp()
}

/// `1 − C α_L² / (4 (f − f_res)² + α_L²)`.
pub fn lorentzian_model(f: f64, contrast: f64, alpha_l: f64, f_res: f64) -> f64 {
    let x = f - f_res;
    1.0 - contrast * alpha_l * alpha_l / (4.0 * x * x + alpha_l * alpha_l)
}

fn voigt_w(x: f64, sigma: f64, nu: f64) -> Complex64 {
    w_upper(Complex64::new(x, nu.abs()) / (sigma.abs() * SQRT_2))
}

/// Unit-area Voigt profile `Re w(z) / (σ√(2π))`, `z = (x + iν)/(σ√2)`.
pub fn voigt_profile(x: f64, sigma: f64, nu: f64) -> f64 {
    voigt_w(x, sigma, nu).re / (sigma.abs() * (2.0 * PI).sqrt())
}

/// `1 − A·V(f − f_res)` with the unit-area Voigt profile `V`.
pub fn voigt_model(f: f64, f_res: f64, sigma: f64, nu: f64, amplitude: f64) -> f64 {
    1.0 - amplitude * voigt_profile(f - f_res, sigma, nu)
}

/// Voigt dip parameterized by its depth `C` at the center.
pub fn voigt_contrast_model(f: f64, f_res: f64, sigma: f64, nu: f64, contrast: f64) -> f64 {
    let peak = voigt_w(0.0, sigma, nu).re;
    1.0 - contrast * voigt_w(f - f_res, sigma, nu).re / peak
}

/// Amplitude `A` of [`voigt_model`] giving depth `contrast` at the center.
pub fn voigt_amplitude_for_contrast(contrast: f64, sigma: f64, nu: f64) -> f64 {
    contrast / voigt_profile(0.0, sigma, nu)
}

/// `∂/∂f` of [`voigt_model`]:
/// `A (x Re w − ν Im w) / (σ³ √(2π))` with `x = f − f_res`.
pub fn voigt_derivative_model(f: f64, f_res: f64, sigma: f64, nu: f64, amplitude: f64) -> f64 {
    let x = f - f_res;
    let (s, n) = (sigma.abs(), nu.abs());
    let w = voigt_w(x, s, n);
    amplitude * (x * w.re - n * w.im) / (s.powi(3) * (2.0 * PI).sqrt())
}

/// Slope of [`gaussian_model`].
pub fn gaussian_slope(f: f64, contrast: f64, alpha_g: f64, f_res: f64) -> f64 {
    let x = f - f_res;
    let k = 4.0 * LN_2 / (alpha_g * alpha_g);
    contrast * 2.0 * k * x * (-k * x * x).exp()
}

/// Slope of [`lorentzian_model`].
pub fn lorentzian_slope(f: f64, contrast: f64, alpha_l: f64, f_res: f64) -> f64 {
    let x = f - f_res;
    let den = 4.0 * x * x + alpha_l * alpha_l;
    contrast * alpha_l * alpha_l * 8.0 * x / (den * den)
}

/// Slope of [`voigt_contrast_model`].
pub fn voigt_contrast_slope(f: f64, f_res: f64, sigma: f64, nu: f64, contrast: f64) -> f64 {
    let amplitude = voigt_amplitude_for_contrast(contrast, sigma, nu);
    voigt_derivative_model(f, f_res, sigma, nu, amplitude)
}

/// Olivero–Longbothum estimate of the Voigt FWHM,
/// `0.5346 α_L + √(0.2166 α_L² + α_G²)`.
pub fn fwhm_voigt(alpha_l: f64, alpha_g: f64) -> f64 {
    0.5346 * alpha_l + (0.2166 * alpha_l * alpha_l + alpha_g * alpha_g).sqrt()
}

/// `d = (α_L − α_G)/(α_L + α_G)`: −1 for a pure Gaussian, +1 for a pure
/// Lorentzian.
pub fn broadening_coordinate(alpha_l: f64, alpha_g: f64) -> f64 {
    (alpha_l - alpha_g) / (alpha_l + alpha_g)
}

/// Inverse of [`broadening_coordinate`] at fixed Voigt FWHM: the
/// `(α_L, α_G)` pair with coordinate `d` whose Olivero width is `alpha_v`.
pub fn widths_for_coordinate(d: f64, alpha_v: f64) -> (f64, f64) {
    let (l, g) = (1.0 + d, 1.0 - d);
    let scale = alpha_v / fwhm_voigt(l, g);
    (l * scale, g * scale)
}
