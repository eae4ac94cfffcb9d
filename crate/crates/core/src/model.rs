//! NV ground-state spin model.
//!
//! The Hamiltonian in frequency units is
//! `H = D Sz² + E (Sx² − Sy²) + γ B·S`, rotated about the NV axis so that the
//! field lies in the xz-plane at angle θ to the axis. All matrices here carry
//! the trace-removing shift `−(D/3) S²`, which turns the characteristic
//! polynomial into the depressed cubic `λ³ + pλ + q`.

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, PI};

use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};

use crate::eigen::eig3_symmetric;
use crate::error::{Error, Result};
use crate::forward::ResonancePair;
use crate::inverse::field_magnitude_sq;

/// Room-temperature zero-field splitting (MHz).
pub const D_ROOM_TEMPERATURE_MHZ: f64 = 2870.0;
/// NV gyromagnetic ratio, 28.032(4) GHz/T expressed in MHz/mT.
pub const GAMMA_NV_MHZ_PER_MT: f64 = 28.032;
/// 1-σ uncertainty of [`GAMMA_NV_MHZ_PER_MT`].
pub const SIGMA_GAMMA_NV_MHZ_PER_MT: f64 = 0.004;
/// Isotropic g-factor that [`GAMMA_NV_MHZ_PER_MT`] corresponds to.
pub const G_REFERENCE: f64 = 2.0028;

/// Calibration constants of one diamond sample.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NvParams {
    pub d_mhz: f64,
    pub e_mhz: f64,
    pub gamma_mhz_per_mt: f64,
    pub sigma_d_mhz: f64,
    pub sigma_e_mhz: f64,
    pub sigma_gamma_mhz_per_mt: f64,
}

impl Default for NvParams {
    fn default() -> Self {
        Self {
            d_mhz: D_ROOM_TEMPERATURE_MHZ,
            e_mhz: 0.0,
            gamma_mhz_per_mt: GAMMA_NV_MHZ_PER_MT,
            sigma_d_mhz: 0.0,
            sigma_e_mhz: 0.0,
            sigma_gamma_mhz_per_mt: SIGMA_GAMMA_NV_MHZ_PER_MT,
        }
    }
}

impl NvParams {
    /// Parameters with zero uncertainties.
    pub fn new(d_mhz: f64, e_mhz: f64, gamma_mhz_per_mt: f64) -> Result<Self> {
        let p = Self {
            d_mhz,
            e_mhz,
            gamma_mhz_per_mt,
            sigma_d_mhz: 0.0,
            sigma_e_mhz: 0.0,
            sigma_gamma_mhz_per_mt: 0.0,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_sigmas(mut self, sigma_d_mhz: f64, sigma_e_mhz: f64, sigma_gamma_mhz_per_mt: f64) -> Result<Self> {
        self.sigma_d_mhz = sigma_d_mhz;
        self.sigma_e_mhz = sigma_e_mhz;
        self.sigma_gamma_mhz_per_mt = sigma_gamma_mhz_per_mt;
        self.validate()?;
        Ok(self)
    }

    /// Sets the γ uncertainty from a g-factor uncertainty, `σ_γ = γ·σ_g / g_ref`.
    pub fn with_g_factor_sigma(mut self, sigma_g: f64) -> Result<Self> {
        self.sigma_gamma_mhz_per_mt = self.gamma_mhz_per_mt * sigma_g / G_REFERENCE;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let all = [
            self.d_mhz,
            self.e_mhz,
            self.gamma_mhz_per_mt,
            self.sigma_d_mhz,
            self.sigma_e_mhz,
            self.sigma_gamma_mhz_per_mt,
        ];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("NV parameters must be finite".into()));
        }
        if self.d_mhz <= 0.0 {
            return Err(Error::InvalidParameter(format!("D must be positive, got {}", self.d_mhz)));
        }
        if self.e_mhz < 0.0 || self.e_mhz >= self.d_mhz {
            return Err(Error::InvalidParameter(format!("E must lie in [0, D), got {}", self.e_mhz)));
        }
        if self.gamma_mhz_per_mt <= 0.0 {
            return Err(Error::InvalidParameter("gyromagnetic ratio must be positive".into()));
        }
        if self.sigma_d_mhz < 0.0 || self.sigma_e_mhz < 0.0 || self.sigma_gamma_mhz_per_mt < 0.0 {
            return Err(Error::InvalidParameter("uncertainties must be non-negative".into()));
        }
        Ok(())
    }
}

/// Effective g-matrix `diag(g⊥, g⊥, g∥)` in the NV frame.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GTensor {
    pub g_perp: f64,
    pub g_par: f64,
}

impl GTensor {
    /// Anisotropic values reported by Felton et al. (2009).
    pub const TABULATED_ANISOTROPIC: GTensor = GTensor { g_perp: 2.0031, g_par: 2.0029 };

    pub fn new(g_perp: f64, g_par: f64) -> Result<Self> {
        for g in [g_perp, g_par] {
            if !(g > 1.9 && g < 2.1) {
                return Err(Error::InvalidParameter(format!("g-factor {g} outside (1.9, 2.1)")));
            }
        }
        Ok(Self { g_perp, g_par })
    }

    pub fn isotropic(g: f64) -> Result<Self> {
        Self::new(g, g)
    }

    pub fn is_isotropic(&self) -> bool {
        self.g_perp == self.g_par
    }

    /// Isotropic tensor with the mean of both components.
    pub fn mean_isotropic(&self) -> Self {
        let g = 0.5 * (self.g_perp + self.g_par);
        Self { g_perp: g, g_par: g }
    }
}

/// Field in the rotated NV frame: magnitude and angle to the NV axis.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FieldPolar {
    pub b_mt: f64,
    /// Angle to the NV axis, folded into `[0, π/2]`.
    pub theta_rad: f64,
    /// `γ·B` in MHz.
    pub eff_mhz: f64,
}

impl FieldPolar {
    pub fn new(params: &NvParams, b_mt: f64, theta_rad: f64) -> Result<Self> {
        if !(b_mt.is_finite() && b_mt >= 0.0) {
            return Err(Error::InvalidParameter(format!("field magnitude must be finite and >= 0, got {b_mt}")));
        }
        if !theta_rad.is_finite() {
            return Err(Error::InvalidParameter("angle must be finite".into()));
        }
        Ok(Self {
            b_mt,
            theta_rad: fold_angle(theta_rad),
            eff_mhz: b_mt * params.gamma_mhz_per_mt,
        })
    }

    /// Builds the polar form directly from an effective field in MHz.
    pub fn from_effective(params: &NvParams, eff_mhz: f64, theta_rad: f64) -> Result<Self> {
        Self::new(params, eff_mhz / params.gamma_mhz_per_mt, theta_rad).map(|mut f| {
            f.eff_mhz = eff_mhz;
            f
        })
    }
}

/// Maps any angle onto `[0, π/2]` using the `cos²θ` symmetry of the spectrum.
fn fold_angle(theta: f64) -> f64 {
    let t = theta.abs().rem_euclid(PI);
    if t > FRAC_PI_2 {
        PI - t
    } else {
        t
    }
}

/// Coefficients of the depressed characteristic cubic `λ³ + pλ + q`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CubicCoeffs {
    /// MHz²; never positive.
    pub p: f64,
    /// MHz³.
    pub q: f64,
}

impl CubicCoeffs {
    /// `−4p³ − 27q²`; non-negative when all three roots are real.
    pub fn discriminant(&self) -> f64 {
        -4.0 * self.p.powi(3) - 27.0 * self.q * self.q
    }
}

pub fn cubic_coeffs(params: &NvParams, field: &FieldPolar) -> CubicCoeffs {
    let d = params.d_mhz;
    let e = params.e_mhz;
    let b2 = field.eff_mhz * field.eff_mhz;
    let (sin_t, cos_t) = field.theta_rad.sin_cos();
    let cos_2t = cos_t * cos_t - sin_t * sin_t;

    let p = -(d * d / 3.0 + e * e + b2);
    let q = -0.5 * d * b2 * cos_2t - e * b2 * sin_t * sin_t - d * b2 / 6.0 + 2.0 * d.powi(3) / 27.0
        - 2.0 * d * e * e / 3.0;
    CubicCoeffs { p, q }
}

/// Shifted Hamiltonian with explicit perpendicular and parallel Zeeman terms
/// (both in MHz).
pub fn hamiltonian_from_components(params: &NvParams, b_perp_mhz: f64, b_par_mhz: f64) -> Matrix3<f64> {
    let d = params.d_mhz;
    let e = params.e_mhz;
    let x = b_perp_mhz * FRAC_1_SQRT_2;
    Matrix3::new(
        d / 3.0 + b_par_mhz, x, e,
        x, -2.0 * d / 3.0, x,
        e, x, d / 3.0 - b_par_mhz,
    )
}

/// Trace-free Hamiltonian matrix for one NV axis.
///
/// With a [`GTensor`], the perpendicular Zeeman term is scaled by
/// `g⊥ / g_ref` and the parallel one by `g∥ / g_ref`, where `g_ref` is the
/// isotropic g-factor behind the configured γ.
pub fn assemble_hamiltonian(params: &NvParams, field: &FieldPolar, g: Option<&GTensor>) -> Matrix3<f64> {
    let (sin_t, cos_t) = field.theta_rad.sin_cos();
    let (scale_perp, scale_par) = match g {
        Some(g) => (g.g_perp / G_REFERENCE, g.g_par / G_REFERENCE),
        None => (1.0, 1.0),
    };
    hamiltonian_from_components(
        params,
        field.eff_mhz * sin_t * scale_perp,
        field.eff_mhz * cos_t * scale_par,
    )
}

/// Resonance pair from the numerically diagonalized Hamiltonian.
pub fn numerical_resonances(h: &Matrix3<f64>) -> Result<ResonancePair> {
    let [l0, l1, l2] = eig3_symmetric(h)?;
    Ok(ResonancePair::exact(l1 - l0, l2 - l0))
}

/// Field error (mT) caused by ignoring g-anisotropy.
///
/// Both Hamiltonians are diagonalized numerically; each resonance pair is
/// converted back to a field value with the isotropic inverse formula and the
/// configured γ, and the absolute difference is returned.
pub fn anisotropy_discrepancy(
    params: &NvParams,
    b_mt: f64,
    theta_rad: f64,
    g_iso: &GTensor,
    g_aniso: &GTensor,
) -> Result<f64> {
    let field = FieldPolar::new(params, b_mt, theta_rad)?;
    let recovered = |g: &GTensor| -> Result<f64> {
        let pair = numerical_resonances(&assemble_hamiltonian(params, &field, Some(g)))?;
        let eff_sq = field_magnitude_sq(params, &pair)?;
        Ok(eff_sq.value.sqrt() / params.gamma_mhz_per_mt)
    };
    Ok((recovered(g_iso)? - recovered(g_aniso)?).abs())
}
