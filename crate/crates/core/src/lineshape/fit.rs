//! Damped least-squares fitting of single ODMR lines.
//!
//! Levenberg–Marquardt with a central-difference Jacobian. The damping
//! diagonal is the running maximum of diag(JᵀJ), as in MINPACK. Fits stop
//! once the relative cost decrease of an accepted step drops below 1e-10, or
//! when no damping can reduce the cost any further.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::profiles::{
    alpha_g_from_sigma, fwhm_voigt, gaussian_model, gaussian_slope, lorentzian_model, lorentzian_slope,
    sigma_from_alpha_g, voigt_contrast_model, voigt_contrast_slope, voigt_derivative_model, voigt_profile,
    broadening_coordinate,
};
use super::spectrum::{moving_average, Spectrum};
use crate::error::{Error, Result};

const REL_COST_TOL: f64 = 1e-10;
const LAMBDA_START: f64 = 1e-3;
const LAMBDA_MAX: f64 = 1e16;
const JACOBIAN_STEP: f64 = 1e-6;
/// Width given to the vanishing component when starting at a Voigt limit,
/// relative to the starting FWHM.
const LIMIT_START_FRACTION: f64 = 1e-4;
/// FWHM of a `d = 0` Voigt line per unit of either component width.
const VOIGT_FWHM_AT_D0: f64 = 1.6376;
/// Minimum depth of a dip in units of the baseline noise.
const MIN_DIP_SNR: f64 = 5.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LineModel {
    Gaussian,
    Lorentzian,
    Voigt,
    /// Lock-in spectra: the frequency derivative of a Voigt dip.
    VoigtDerivative,
}

impl LineModel {
    pub fn name(self) -> &'static str {
        match self {
            LineModel::Gaussian => "gaussian",
            LineModel::Lorentzian => "lorentzian",
            LineModel::Voigt => "voigt",
            LineModel::VoigtDerivative => "voigt_derivative",
        }
    }

    fn parameter_names(self) -> &'static [&'static str] {
        match self {
            LineModel::Gaussian => &["f_res_mhz", "contrast", "alpha_g_mhz"],
            LineModel::Lorentzian => &["f_res_mhz", "contrast", "alpha_l_mhz"],
            LineModel::Voigt => &["f_res_mhz", "contrast", "sigma_g_mhz", "nu_l_mhz"],
            LineModel::VoigtDerivative => &["f_res_mhz", "amplitude", "sigma_g_mhz", "nu_l_mhz"],
        }
    }
}

impl std::str::FromStr for LineModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gauss" | "gaussian" => Ok(LineModel::Gaussian),
            "lorentz" | "lorentzian" => Ok(LineModel::Lorentzian),
            "voigt" => Ok(LineModel::Voigt),
            "voigt_derivative" | "voigt-derivative" | "derivative" => Ok(LineModel::VoigtDerivative),
            other => Err(Error::InvalidParameter(format!("unknown line model '{other}'"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FitOptions {
    pub model: LineModel,
    /// Adds `b₀ + b₁ (f − f_ref)` to the model, `f_ref` being the window centre.
    pub linear_baseline: bool,
    pub max_iterations: usize,
}

impl FitOptions {
    pub fn new(model: LineModel) -> Self {
        Self { model, linear_baseline: false, max_iterations: 200 }
    }
}

/// Fitted line with derived widths.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LineFit {
    pub model: LineModel,
    pub f_res_mhz: f64,
    /// Depth of the dip at `f_res`.
    pub contrast: f64,
    /// Amplitude of the unit-area form `1 − A·V(f)`.
    pub amplitude: f64,
    pub sigma_g_mhz: f64,
    pub nu_l_mhz: f64,
    pub alpha_g_mhz: f64,
    pub alpha_l_mhz: f64,
    pub alpha_v_mhz: f64,
    pub d: f64,
    /// `[b₀, b₁]` of the optional linear baseline.
    pub baseline: Option<[f64; 2]>,
    pub f_ref_mhz: f64,
    pub r_squared: f64,
    pub ssr: f64,
    pub parameter_names: Vec<&'static str>,
    pub parameters: Vec<f64>,
    pub covariance: Vec<Vec<f64>>,
    pub iterations: usize,
    pub converged: bool,
}

impl LineFit {
    /// Model value including the baseline.
    pub fn value(&self, f: f64) -> f64 {
        eval(self.model, &self.parameters, f, self.f_ref_mhz, self.baseline.is_some())
    }

    /// `∂ODMR/∂f` of the fitted line, without the baseline slope. For lock-in
    /// fits this is the fitted signal itself.
    pub fn odmr_slope(&self, f: f64) -> f64 {
        let p = &self.parameters;
        match self.model {
            LineModel::Gaussian => gaussian_slope(f, p[1], p[2].abs(), p[0]),
            LineModel::Lorentzian => lorentzian_slope(f, p[1], p[2].abs(), p[0]),
            LineModel::Voigt => voigt_contrast_slope(f, p[0], p[2], p[3], p[1]),
            LineModel::VoigtDerivative => voigt_derivative_model(f, p[0], p[2], p[3], p[1]),
        }
    }

    /// 1-σ parameter uncertainties from the covariance diagonal.
    pub fn std_errors(&self) -> Vec<f64> {
        (0..self.parameters.len()).map(|i| self.covariance[i][i].sqrt()).collect()
    }
}

fn eval(model: LineModel, p: &[f64], f: f64, f_ref: f64, baseline: bool) -> f64 {
    let line = match model {
        LineModel::Gaussian => gaussian_model(f, p[1], p[2].abs(), p[0]),
        LineModel::Lorentzian => lorentzian_model(f, p[1], p[2].abs(), p[0]),
        LineModel::Voigt => voigt_contrast_model(f, p[0], p[2], p[3], p[1]),
        LineModel::VoigtDerivative => voigt_derivative_model(f, p[0], p[2], p[3], p[1]),
    };
    if baseline {
        let n = model.parameter_names().len();
        line + p[n] + p[n + 1] * (f - f_ref)
    } else {
        line
    }
}

/// Fits one line with default options.
pub fn fit_line(spec: &Spectrum, model: LineModel) -> Result<LineFit> {
    fit_line_with(spec, &FitOptions::new(model))
}

/// Fits one line.
///
/// Voigt models start from the `d = 0` guess and additionally from its
/// Lorentzian and Gaussian limits; the lowest-cost result is kept. Each
/// limit is a stationary point of the vanishing width, so a single start can
/// settle there even when the other limit or a mixed shape fits better.
pub fn fit_line_with(spec: &Spectrum, opts: &FitOptions) -> Result<LineFit> {
    let f_ref = 0.5 * (spec.freqs_mhz[0] + spec.freqs_mhz[spec.len() - 1]);
    let (p0, typical) = initial_guess(spec, opts)?;
    let weights: Vec<f64> = match &spec.sigma {
        Some(s) => s.iter().map(|v| 1.0 / v).collect(),
        None => vec![1.0; spec.len()],
    };
    let residuals = |p: &[f64]| -> DVector<f64> {
        DVector::from_fn(spec.len(), |i, _| {
            (spec.signal[i] - eval(opts.model, p, spec.freqs_mhz[i], f_ref, opts.linear_baseline)) * weights[i]
        })
    };
    let steps: Vec<f64> = typical.iter().map(|t| JACOBIAN_STEP * t).collect();
    let jacobian = |p: &[f64]| -> DMatrix<f64> {
        let mut j = DMatrix::zeros(spec.len(), p.len());
        let mut q = p.to_vec();
        for k in 0..p.len() {
            q[k] = p[k] + steps[k];
            let up = residuals(&q);
            q[k] = p[k] - steps[k];
            let down = residuals(&q);
            q[k] = p[k];
            // residual = y − model, so ∂model/∂p = −∂r/∂p
            j.set_column(k, &((down - up) / (2.0 * steps[k])));
        }
        j
    };

    let mut starts = vec![p0.clone()];
    if matches!(opts.model, LineModel::Voigt | LineModel::VoigtDerivative) {
        let alpha = p0[3] * 2.0;
        let mut lorentz = p0.clone();
        lorentz[2] = LIMIT_START_FRACTION * alpha;
        lorentz[3] = 0.5 * alpha;
        let mut gauss = p0.clone();
        gauss[2] = sigma_from_alpha_g(alpha);
        gauss[3] = LIMIT_START_FRACTION * alpha;
        starts.extend([lorentz, gauss]);
    }

    let mut best: Option<Minimum> = None;
    for start in starts {
        let m = minimize(&residuals, &jacobian, start, opts.max_iterations)?;
        if best.as_ref().is_none_or(|b| m.cost < b.cost) {
            best = Some(m);
        }
    }
    let m = best.expect("at least one start");
    let fit = summarize(spec, opts, f_ref, &m.p, &jacobian(&m.p), m.cost, m.iterations, m.converged);
    if m.converged {
        Ok(fit)
    } else {
        Err(Error::FitNotConverged { best: Box::new(fit) })
    }
}

struct Minimum {
    p: Vec<f64>,
    cost: f64,
    iterations: usize,
    converged: bool,
}

fn minimize(
    residuals: &impl Fn(&[f64]) -> DVector<f64>,
    jacobian: &impl Fn(&[f64]) -> DMatrix<f64>,
    p0: Vec<f64>,
    max_iterations: usize,
) -> Result<Minimum> {
    let mut p = p0;
    let mut r = residuals(&p);
    let mut cost = r.norm_squared();
    if !cost.is_finite() {
        return Err(Error::InvalidSpectrum("model is not finite at the initial guess".into()));
    }
    let mut lambda = LAMBDA_START;
    let mut converged = false;
    let mut iterations = 0;
    // damping diagonal: running maximum of diag(JᵀJ), so a parameter whose
    // sensitivity vanishes at the optimum (σ or ν of a Voigt at 0) stays damped
    let mut scale = vec![0.0f64; p.len()];

    while iterations < max_iterations {
        iterations += 1;
        let j = jacobian(&p);
        let jtj = j.transpose() * &j;
        let jtr = j.transpose() * &r;
        for (k, sk) in scale.iter_mut().enumerate() {
            *sk = sk.max(jtj[(k, k)]);
        }
        let diag_floor = 1e-30 * jtj.diagonal().max().max(1e-300);

        let mut accepted = None;
        while lambda <= LAMBDA_MAX {
            let mut a = jtj.clone();
            for k in 0..p.len() {
                a[(k, k)] += lambda * scale[k].max(diag_floor);
            }
            let Some(chol) = a.cholesky() else {
                lambda *= 10.0;
                continue;
            };
            let delta = chol.solve(&jtr);
            let trial: Vec<f64> = p.iter().zip(delta.iter()).map(|(a, b)| a + b).collect();
            let r_trial = residuals(&trial);
            let c_trial = r_trial.norm_squared();
            if c_trial < cost {
                accepted = Some((trial, r_trial, c_trial));
                lambda = (lambda / 10.0).max(1e-12);
                break;
            }
            lambda *= 10.0;
        }

        match accepted {
            Some((trial, r_trial, c_trial)) => {
                let decrease = (cost - c_trial) / cost;
                p = trial;
                r = r_trial;
                cost = c_trial;
                if decrease < REL_COST_TOL || cost == 0.0 {
                    converged = true;
                    break;
                }
            }
            None => {
                // no damping reduces the cost: already at the minimum
                converged = true;
                break;
            }
        }
    }
    Ok(Minimum { p, cost, iterations, converged })
}

#[allow(clippy::too_many_arguments)]
fn summarize(
    spec: &Spectrum,
    opts: &FitOptions,
    f_ref: f64,
    p: &[f64],
    j: &DMatrix<f64>,
    weighted_cost: f64,
    iterations: usize,
    converged: bool,
) -> LineFit {
    let n = spec.len();
    let m = p.len();
    let ssr: f64 = (0..n)
        .map(|i| (spec.signal[i] - eval(opts.model, p, spec.freqs_mhz[i], f_ref, opts.linear_baseline)).powi(2))
        .sum();
    let mean = spec.signal.iter().sum::<f64>() / n as f64;
    let sst: f64 = spec.signal.iter().map(|y| (y - mean).powi(2)).sum();
    let r_squared = if sst > 0.0 { 1.0 - ssr / sst } else { f64::NAN };

    let dof = n.saturating_sub(m).max(1) as f64;
    let scale = weighted_cost / dof;
    let covariance = match (j.transpose() * j).try_inverse() {
        Some(inv) => (0..m).map(|a| (0..m).map(|b| inv[(a, b)] * scale).collect()).collect(),
        None => vec![vec![f64::NAN; m]; m],
    };

    let mut params = p.to_vec();
    let (sigma, nu, contrast, amplitude) = match opts.model {
        LineModel::Gaussian => {
            params[2] = params[2].abs();
            let s = sigma_from_alpha_g(params[2]);
            (s, 0.0, params[1], params[1] * s * (2.0 * std::f64::consts::PI).sqrt())
        }
        LineModel::Lorentzian => {
            params[2] = params[2].abs();
            let nu = 0.5 * params[2];
            (0.0, nu, params[1], params[1] * std::f64::consts::PI * nu)
        }
        LineModel::Voigt => {
            params[2] = params[2].abs();
            params[3] = params[3].abs();
            let (s, nu) = (params[2], params[3]);
            (s, nu, params[1], params[1] / voigt_profile(0.0, s, nu))
        }
        LineModel::VoigtDerivative => {
            params[2] = params[2].abs();
            params[3] = params[3].abs();
            let (s, nu) = (params[2], params[3]);
            (s, nu, params[1] * voigt_profile(0.0, s, nu), params[1])
        }
    };
    let alpha_g = alpha_g_from_sigma(sigma);
    let alpha_l = 2.0 * nu;
    let k = opts.model.parameter_names().len();

    LineFit {
        model: opts.model,
        f_res_mhz: params[0],
        contrast,
        amplitude,
        sigma_g_mhz: sigma,
        nu_l_mhz: nu,
        alpha_g_mhz: alpha_g,
        alpha_l_mhz: alpha_l,
        alpha_v_mhz: fwhm_voigt(alpha_l, alpha_g),
        d: broadening_coordinate(alpha_l, alpha_g),
        baseline: opts.linear_baseline.then(|| [params[k], params[k + 1]]),
        f_ref_mhz: f_ref,
        r_squared,
        ssr,
        parameter_names: {
            let mut names = opts.model.parameter_names().to_vec();
            if opts.linear_baseline {
                names.extend(["baseline_offset", "baseline_slope_per_mhz"]);
            }
            names
        },
        parameters: params,
        covariance,
        iterations,
        converged,
    }
}

/// Mean and standard deviation of the outer tenth of points on each side.
fn edge_stats(signal: &[f64]) -> (f64, f64) {
    let k = (signal.len() / 10).max(2);
    let edge: Vec<f64> = signal[..k].iter().chain(&signal[signal.len() - k..]).copied().collect();
    let mean = edge.iter().sum::<f64>() / edge.len() as f64;
    let var = edge.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (edge.len() - 1) as f64;
    (mean, var.sqrt())
}

/// Frequency where `smooth` crosses `level`, walking outward from `start`.
fn crossing(f: &[f64], smooth: &[f64], start: usize, level: f64, step: isize) -> Option<f64> {
    let mut i = start as isize;
    loop {
        let next = i + step;
        if next < 0 || next as usize >= f.len() {
            return None;
        }
        let (a, b) = (i as usize, next as usize);
        if smooth[b] >= level {
            let t = (level - smooth[a]) / (smooth[b] - smooth[a]);
            return Some(f[a] + t * (f[b] - f[a]));
        }
        i = next;
    }
}

/// Starting parameters and their typical scales (for Jacobian steps).
fn initial_guess(spec: &Spectrum, opts: &FitOptions) -> Result<(Vec<f64>, Vec<f64>)> {
    let f = &spec.freqs_mhz;
    let n = f.len();
    let smooth = moving_average(&spec.signal, 2);
    let (edge_mean, edge_std) = edge_stats(&smooth);
    let span = f[n - 1] - f[0];

    let (mut p, mut typ) = match opts.model {
        LineModel::VoigtDerivative => {
            let imax = argmax(&smooth);
            let imin = argmin(&smooth);
            let swing = smooth[imax] - smooth[imin];
            if imax == imin || !(swing > MIN_DIP_SNR * edge_std) || swing <= 0.0 {
                return Err(Error::NoDipFound);
            }
            let f_res = 0.5 * (f[imax] + f[imin]);
            let pp = (f[imax] - f[imin]).abs().max(span / n as f64);
            let alpha = pp / 0.75;
            let (s, nu) = (sigma_from_alpha_g(alpha), 0.5 * alpha);
            // the shape is linear in the amplitude
            let unit: Vec<f64> = f.iter().map(|&x| voigt_derivative_model(x, f_res, s, nu, 1.0)).collect();
            let offset = if opts.linear_baseline { edge_mean } else { 0.0 };
            let num: f64 = unit.iter().zip(&spec.signal).map(|(u, y)| u * (y - offset)).sum();
            let den: f64 = unit.iter().map(|u| u * u).sum();
            let amp = num / den;
            (vec![f_res, amp, s, nu], vec![alpha, amp.abs(), alpha, alpha])
        }
        _ => {
            let imin = argmin(&smooth);
            let reference = if opts.linear_baseline { edge_mean } else { 1.0 };
            let depth = reference - smooth[imin];
            if imin == 0 || imin == n - 1 || !(depth > 0.0) || depth <= MIN_DIP_SNR * edge_std {
                return Err(Error::NoDipFound);
            }
            let half = reference - 0.5 * depth;
            let left = crossing(f, &smooth, imin, half, -1);
            let right = crossing(f, &smooth, imin, half, 1);
            let width = match (left, right) {
                (Some(l), Some(r)) => r - l,
                (Some(l), None) => 2.0 * (f[imin] - l),
                (None, Some(r)) => 2.0 * (r - f[imin]),
                (None, None) => 0.25 * span,
            }
            .max(2.0 * span / n as f64);
            let f_res = f[imin];
            match opts.model {
                LineModel::Gaussian | LineModel::Lorentzian => (vec![f_res, depth, width], vec![width, depth, width]),
                _ => {
                    let alpha = width / VOIGT_FWHM_AT_D0;
                    (vec![f_res, depth, sigma_from_alpha_g(alpha), 0.5 * alpha], vec![width, depth, width, width])
                }
            }
        }
    };
    if opts.linear_baseline {
        let b0 = if opts.model == LineModel::VoigtDerivative { edge_mean } else { edge_mean - 1.0 };
        let scale = typ[1].max(edge_std);
        p.extend([b0, 0.0]);
        typ.extend([scale, scale / span]);
    }
    Ok((p, typ))
}

fn argmin(v: &[f64]) -> usize {
    (0..v.len()).min_by(|&a, &b| v[a].total_cmp(&v[b])).unwrap_or(0)
}

fn argmax(v: &[f64]) -> usize {
    (0..v.len()).max_by(|&a, &b| v[a].total_cmp(&v[b])).unwrap_or(0)
}
