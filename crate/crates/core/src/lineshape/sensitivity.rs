//! Shot-noise-limited sensitivity from the steepest point of a fitted line.

use serde::Serialize;

use super::fit::LineFit;
use crate::error::{Error, Result};

const GOLDEN: f64 = 0.618_033_988_749_894_8;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SensitivityReport {
    pub eta_t_per_sqrt_hz: f64,
    /// Detected photons per second.
    pub photon_rate: f64,
    /// `max |∂ODMR/∂f|` in 1/MHz.
    pub max_slope_per_mhz: f64,
    /// Frequency of the steepest point.
    pub slope_freq_mhz: f64,
}

/// `η = 1 / (γ · max|∂ODMR/∂f| · √P)`, converted to T/√Hz.
pub fn sensitivity_from_slope(max_slope_per_mhz: f64, gamma_mhz_per_mt: f64, photon_rate: f64) -> Result<f64> {
    if !(photon_rate > 0.0) {
        return Err(Error::InvalidParameter(format!("photon rate must be positive, got {photon_rate}")));
    }
    if !(max_slope_per_mhz > 0.0 && gamma_mhz_per_mt > 0.0) {
        return Err(Error::InvalidParameter("slope and gyromagnetic ratio must be positive".into()));
    }
    // γ·slope is per mT; 1e3 converts to per T
    Ok(1.0 / (gamma_mhz_per_mt * max_slope_per_mhz * 1e3 * photon_rate.sqrt()))
}

/// Sensitivity of a fitted line; the steepest point is found by golden-section
/// search on `[f_res, f_res + 3 α_V]`.
pub fn sensitivity(fit: &LineFit, gamma_mhz_per_mt: f64, photon_rate: f64) -> Result<SensitivityReport> {
    let width = fit.alpha_v_mhz;
    if !(width > 0.0 && width.is_finite()) {
        return Err(Error::InvalidParameter("fitted line has no width".into()));
    }
    let slope = |f: f64| fit.odmr_slope(f).abs();
    let (f_max, s_max) = golden_max(slope, fit.f_res_mhz, fit.f_res_mhz + 3.0 * width, 1e-9 * width);
    Ok(SensitivityReport {
        eta_t_per_sqrt_hz: sensitivity_from_slope(s_max, gamma_mhz_per_mt, photon_rate)?,
        photon_rate,
        max_slope_per_mhz: s_max,
        slope_freq_mhz: f_max,
    })
}

/// Maximum of a unimodal function on `[a, b]`.
pub fn golden_max(g: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let mut c = b - GOLDEN * (b - a);
    let mut d = a + GOLDEN * (b - a);
    let (mut gc, mut gd) = (g(c), g(d));
    while (b - a).abs() > tol {
        if gc > gd {
            b = d;
            d = c;
            gd = gc;
            c = b - GOLDEN * (b - a);
            gc = g(c);
        } else {
            a = c;
            c = d;
            gc = gd;
            d = a + GOLDEN * (b - a);
            gd = g(d);
        }
    }
    let x = 0.5 * (a + b);
    (x, g(x))
}
