//! Field magnitude and cone angle of one NV axis from its resonance pair.
//!
//! Both quantities follow from matching the roots `λ₀ = −(f_u + f_l)/3`,
//! `λ₁ = (2f_l − f_u)/3`, `λ₂ = (2f_u − f_l)/3` to the coefficients of the
//! characteristic cubic. Uncertainties are propagated to first order over
//! `(f_u, f_l, D, E)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forward::{resonances, ResonancePair};
use crate::model::{FieldPolar, NvParams};

/// Default fit uncertainty of a resonance line (MHz).
pub const DEFAULT_FIT_SIGMA_MHZ: f64 = 0.01;
const COS_SQ_CLAMP_TOL: f64 = 1e-6;

/// A value with its variance.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Estimate {
    pub value: f64,
    pub variance: f64,
}

impl Estimate {
    pub fn sigma(&self) -> f64 {
        self.variance.sqrt()
    }
}

/// One fitted spectral line.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralLine {
    pub freq_mhz: f64,
    pub sigma_mhz: f64,
}

impl SpectralLine {
    pub fn new(freq_mhz: f64, sigma_mhz: f64) -> Self {
        Self { freq_mhz, sigma_mhz }
    }
}

/// Per-axis result of the inverse solution.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct AxisMeasurement {
    /// `𝓑²` in MHz².
    pub eff_sq_mhz2: f64,
    pub cos_sq_theta: f64,
    pub var_eff_sq: f64,
    pub var_cos_sq: f64,
}

impl AxisMeasurement {
    pub fn b_mt(&self, params: &NvParams) -> f64 {
        self.eff_sq_mhz2.sqrt() / params.gamma_mhz_per_mt
    }

    /// Variance of the field magnitude from the resonance/D/E uncertainties
    /// (γ uncertainty excluded; it is common to all axes).
    pub fn var_b_mt(&self, params: &NvParams) -> f64 {
        if self.eff_sq_mhz2 <= 0.0 {
            return self.var_eff_sq.sqrt() / params.gamma_mhz_per_mt.powi(2);
        }
        self.var_eff_sq / (4.0 * self.eff_sq_mhz2 * params.gamma_mhz_per_mt.powi(2))
    }

    pub fn cos_theta(&self) -> f64 {
        self.cos_sq_theta.sqrt()
    }

    /// Variance of `cos θ = √(cos²θ)`.
    ///
    /// The delta method diverges at `cos θ → 0`; the `2σ` term in the
    /// denominator keeps the variance at the `σ(cos²θ)` scale there.
    pub fn var_cos_theta(&self) -> f64 {
        let s = self.var_cos_sq.sqrt();
        if s == 0.0 {
            return 0.0;
        }
        self.var_cos_sq / (4.0 * self.cos_sq_theta + 2.0 * s)
    }

    pub fn theta_rad(&self) -> f64 {
        self.cos_theta().min(1.0).acos()
    }
}

/// Hyperfine structure of each resonance in the spectrum.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HyperfineMode {
    /// Unresolved: one line per resonance.
    #[default]
    None,
    /// ¹⁴N, three lines; the unshifted m_I = 0 line is used.
    N14,
    /// ¹⁵N, two lines shifted symmetrically; their mean is used.
    N15,
}

impl HyperfineMode {
    pub fn line_count(self) -> usize {
        match self {
            HyperfineMode::None => 1,
            HyperfineMode::N14 => 3,
            HyperfineMode::N15 => 2,
        }
    }
}

impl std::str::FromStr for HyperfineMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "none" => Ok(HyperfineMode::None),
            "n14" | "14n" => Ok(HyperfineMode::N14),
            "n15" | "15n" => Ok(HyperfineMode::N15),
            other => Err(Error::InvalidParameter(format!("unknown hyperfine mode '{other}'"))),
        }
    }
}

/// Reduces the hyperfine multiplet of one resonance to a single frequency.
pub fn preprocess_hyperfine(lines: &[SpectralLine], mode: HyperfineMode) -> Result<SpectralLine> {
    if lines.len() != mode.line_count() {
        return Err(Error::WrongLineCount { expected: mode.line_count(), got: lines.len() });
    }
    let mut sorted = lines.to_vec();
    sorted.sort_by(|a, b| a.freq_mhz.total_cmp(&b.freq_mhz));
    Ok(match mode {
        HyperfineMode::None => sorted[0],
        HyperfineMode::N14 => sorted[1],
        HyperfineMode::N15 => SpectralLine {
            freq_mhz: 0.5 * (sorted[0].freq_mhz + sorted[1].freq_mhz),
            sigma_mhz: 0.5 * (sorted[0].sigma_mhz.powi(2) + sorted[1].sigma_mhz.powi(2)).sqrt(),
        },
    })
}

/// Splits a full spectrum into consecutive multiplets and reduces each.
pub fn collapse_hyperfine(lines: &[SpectralLine], mode: HyperfineMode) -> Result<Vec<SpectralLine>> {
    let n = mode.line_count();
    if !lines.len().is_multiple_of(n) {
        return Err(Error::WrongLineCount { expected: (lines.len() / n + 1) * n, got: lines.len() });
    }
    let mut sorted = lines.to_vec();
    sorted.sort_by(|a, b| a.freq_mhz.total_cmp(&b.freq_mhz));
    sorted.chunks(n).map(|c| preprocess_hyperfine(c, mode)).collect()
}

/// Partial derivatives of `𝓑²` with respect to `(f_u, f_l, D, E)`.
fn eff_sq_gradient(params: &NvParams, pair: &ResonancePair) -> [f64; 4] {
    let (fu, fl) = (pair.f_u_mhz, pair.f_l_mhz);
    [
        (2.0 * fu - fl) / 3.0,
        (2.0 * fl - fu) / 3.0,
        -2.0 * params.d_mhz / 3.0,
        -2.0 * params.e_mhz,
    ]
}

fn input_sigmas(params: &NvParams, pair: &ResonancePair) -> [f64; 4] {
    [pair.sigma_u_mhz, pair.sigma_l_mhz, params.sigma_d_mhz, params.sigma_e_mhz]
}

fn propagate(gradient: &[f64; 4], sigmas: &[f64; 4]) -> f64 {
    gradient.iter().zip(sigmas).map(|(g, s)| (g * s).powi(2)).sum()
}

/// `𝓑² = (f_u² + f_l² − f_u f_l − D² − 3E²) / 3` with its variance.
///
/// Slightly negative values, within ten propagated standard deviations
/// (at least `10·D·σ` with σ = [`DEFAULT_FIT_SIGMA_MHZ`]), are clamped to zero.
pub fn field_magnitude_sq(params: &NvParams, pair: &ResonancePair) -> Result<Estimate> {
    let (fu, fl) = (pair.f_u_mhz, pair.f_l_mhz);
    if fl > fu {
        return Err(Error::InvalidParameter(format!("f_l = {fl} exceeds f_u = {fu}")));
    }
    let (d, e) = (params.d_mhz, params.e_mhz);
    let mut value = (fu * fu + fl * fl - fu * fl - d * d - 3.0 * e * e) / 3.0;
    let variance = propagate(&eff_sq_gradient(params, pair), &input_sigmas(params, pair));

    if value < 0.0 {
        // ten standard deviations of 𝓑²; near zero field that is about D·σ
        let floor = d * DEFAULT_FIT_SIGMA_MHZ;
        if value < -10.0 * variance.sqrt().max(floor) {
            return Err(Error::InconsistentResonances { eff_sq_mhz2: value });
        }
        value = 0.0;
    }
    Ok(Estimate { value, variance })
}

/// `cos²θ` of the field to the NV axis, given `𝓑²` from
/// [`field_magnitude_sq`].
pub fn cone_angle(params: &NvParams, pair: &ResonancePair, eff_sq: f64) -> Result<Estimate> {
    if !(eff_sq > 0.0) {
        return Err(Error::ZeroField);
    }
    let (fu, fl) = (pair.f_u_mhz, pair.f_l_mhz);
    let (d, e) = (params.d_mhz, params.e_mhz);

    let num = 2.0 * fl.powi(3) - 3.0 * fl * fl * fu - 3.0 * fl * fu * fu + 2.0 * fu.powi(3) + 2.0 * d.powi(3)
        - 18.0 * d * e * e;
    let den = 27.0 * (d - e) * eff_sq;
    let tail = (d - 3.0 * e) / (3.0 * (d - e));
    let mut value = num / den + tail;

    // total derivatives, with 𝓑² itself a function of (f_u, f_l, D, E)
    let s_grad = eff_sq_gradient(params, pair);
    let num_grad = [
        -3.0 * fl * fl - 6.0 * fl * fu + 6.0 * fu * fu,
        6.0 * fl * fl - 6.0 * fl * fu - 3.0 * fu * fu,
        6.0 * d * d - 18.0 * e * e,
        -36.0 * d * e,
    ];
    let den_grad = [
        27.0 * (d - e) * s_grad[0],
        27.0 * (d - e) * s_grad[1],
        27.0 * eff_sq + 27.0 * (d - e) * s_grad[2],
        -27.0 * eff_sq + 27.0 * (d - e) * s_grad[3],
    ];
    let tail_grad = [0.0, 0.0, 2.0 * e / (3.0 * (d - e).powi(2)), -2.0 * d / (3.0 * (d - e).powi(2))];
    let mut grad = [0.0; 4];
    for k in 0..4 {
        grad[k] = num_grad[k] / den - num * den_grad[k] / (den * den) + tail_grad[k];
    }
    let variance = propagate(&grad, &input_sigmas(params, pair));

    if !(-COS_SQ_CLAMP_TOL..=1.0 + COS_SQ_CLAMP_TOL).contains(&value) {
        return Err(Error::AngleOutOfRange { value });
    }
    value = value.clamp(0.0, 1.0);
    Ok(Estimate { value, variance })
}

/// Full inverse solution for one axis.
pub fn measure_axis(params: &NvParams, pair: &ResonancePair) -> Result<AxisMeasurement> {
    let eff_sq = field_magnitude_sq(params, pair)?;
    let cos_sq = cone_angle(params, pair, eff_sq.value)?;
    Ok(AxisMeasurement {
        eff_sq_mhz2: eff_sq.value,
        cos_sq_theta: cos_sq.value,
        var_eff_sq: eff_sq.variance,
        var_cos_sq: cos_sq.variance,
    })
}

/// Field magnitude (mT) assuming the field is aligned with the NV axis:
/// `𝓑 = √((f_u − f_l)²/4 − E²)`.
pub fn aligned_field_approx(params: &NvParams, pair: &ResonancePair) -> Result<f64> {
    let radicand = (pair.f_u_mhz - pair.f_l_mhz).powi(2) / 4.0 - params.e_mhz.powi(2);
    if radicand < 0.0 {
        return Err(Error::SplittingBelowStrain);
    }
    Ok(radicand.sqrt() / params.gamma_mhz_per_mt)
}

/// `|B_approx − B|` (mT) of the aligned-field approximation over a grid.
///
/// Rows follow `b_grid_mt`, columns follow `theta_grid_rad`.
pub fn alignment_error_map(params: &NvParams, b_grid_mt: &[f64], theta_grid_rad: &[f64]) -> Result<Vec<Vec<f64>>> {
    if b_grid_mt.is_empty() || theta_grid_rad.is_empty() {
        return Err(Error::InvalidParameter("alignment error grids must be non-empty".into()));
    }
    b_grid_mt
        .iter()
        .map(|&b| {
            theta_grid_rad
                .iter()
                .map(|&theta| {
                    let pair = resonances(params, &FieldPolar::new(params, b, theta)?)?;
                    Ok((aligned_field_approx(params, &pair)? - b).abs())
                })
                .collect()
        })
        .collect()
}
