//! Itemized accuracy budget of a single-axis field measurement.
//!
//! Every entry is a relative field error `ΔB/B`. Entries are kept separate:
//! some are systematic, some statistical, and no combination rule is implied.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::forward::resonances;
use crate::inverse::{alignment_error_map, field_magnitude_sq};
use crate::model::{anisotropy_discrepancy, FieldPolar, GTensor, NvParams};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct UncertaintyBudget {
    /// From `σ_γ / γ`.
    pub gamma_uncertainty: f64,
    /// From ignoring g-anisotropy.
    pub g_anisotropy: f64,
    /// From the aligned-field approximation at the given angle.
    pub theta_zero_approx: f64,
    /// From a `D` fit uncertainty equal to the line fit σ.
    pub d_fit: f64,
    /// From an `E` fit uncertainty equal to the line fit σ.
    pub e_fit: f64,
    /// From the `f_u` and `f_l` fit uncertainties, added in quadrature.
    pub f_fit: f64,
}

/// Budget with the tabulated anisotropic g-tensor.
pub fn uncertainty_budget(params: &NvParams, b_mt: f64, theta_rad: f64, fit_sigma_mhz: f64) -> Result<UncertaintyBudget> {
    uncertainty_budget_with_tensor(params, b_mt, theta_rad, fit_sigma_mhz, &GTensor::TABULATED_ANISOTROPIC)
}

/// Budget for an explicit g-tensor; the anisotropy entry compares the tensor
/// with its isotropic mean.
pub fn uncertainty_budget_with_tensor(
    params: &NvParams,
    b_mt: f64,
    theta_rad: f64,
    fit_sigma_mhz: f64,
    g: &GTensor,
) -> Result<UncertaintyBudget> {
    if !(b_mt > 0.0 && b_mt.is_finite()) {
        return Err(Error::InvalidParameter(format!("budget needs a positive field, got {b_mt}")));
    }
    if !(fit_sigma_mhz >= 0.0) {
        return Err(Error::InvalidParameter("fit sigma must be >= 0".into()));
    }
    let field = FieldPolar::new(params, b_mt, theta_rad)?;
    let pair = resonances(params, &field)?;
    let eff_sq = field_magnitude_sq(params, &pair)?.value;
    if eff_sq <= 0.0 {
        return Err(Error::ZeroField);
    }

    // ΔB/B = Δ𝓑²/(2𝓑²) for each input of the magnitude formula
    let rel = |partial: f64| (partial * fit_sigma_mhz).abs() / (2.0 * eff_sq);
    let (fu, fl) = (pair.f_u_mhz, pair.f_l_mhz);
    let f_u = rel((2.0 * fu - fl) / 3.0);
    let f_l = rel((2.0 * fl - fu) / 3.0);

    let aniso = if g.is_isotropic() {
        0.0
    } else {
        anisotropy_discrepancy(params, b_mt, field.theta_rad, &g.mean_isotropic(), g)?
    };
    let approx = alignment_error_map(params, &[b_mt], &[field.theta_rad])?[0][0];

    Ok(UncertaintyBudget {
        gamma_uncertainty: params.sigma_gamma_mhz_per_mt / params.gamma_mhz_per_mt,
        g_anisotropy: aniso / b_mt,
        theta_zero_approx: approx / b_mt,
        d_fit: rel(2.0 * params.d_mhz / 3.0),
        e_fit: rel(2.0 * params.e_mhz),
        f_fit: f_u.hypot(f_l),
    })
}
