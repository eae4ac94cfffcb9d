//! Numerical reference solver: fits a field vector to measured resonance
//! pairs by gradient descent on the squared frequency residuals.
//!
//! Each evaluation diagonalizes the four axis Hamiltonians with the Jacobi
//! solver. Gradients are central differences with a 1e-4 mT step; steps use
//! the Barzilai–Borwein length, backtracked until the Armijo condition
//! (c = 1e-4) holds. The search stops when the gradient norm falls below
//! 1e-9 MHz²/mT, or when an accepted step is shorter than 1e-10 mT while
//! the gradient is below 1e-4 MHz²/mT.

use nalgebra::Vector3;
use serde::Serialize;

use crate::eigen::eig3_symmetric;
use crate::error::{Error, Result};
use crate::forward::{nv_axis, ResonancePair};
use crate::model::{hamiltonian_from_components, NvParams};
use crate::reconstruct::FieldVector;

const GRADIENT_STEP_MT: f64 = 1e-4;
const ARMIJO_C: f64 = 1e-4;
const GRADIENT_TOL: f64 = 1e-9;
/// Accepted steps shorter than this (mT) end the search; the curvature of
/// the residual is ~10³ MHz²/mT², so the gradient tolerance alone asks for
/// field accuracy below the round-off of the eigenvalues.
const STEP_TOL_MT: f64 = 1e-10;
/// Gradient norm accepted once progress stalls. The central-difference
/// truncation error (~h²·f‴/6) keeps the computed gradient near 1e-6 at the
/// minimum; 1e-4 MHz²/mT corresponds to ~5e-8 mT of field error.
const GRADIENT_FLOOR: f64 = 1e-4;
const MAX_ITERATIONS: usize = 10_000;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BaselineResult {
    pub field: FieldVector,
    pub iterations: usize,
    pub gradient_norm: f64,
    pub ssr_mhz2: f64,
}

/// Resonance pairs of a lattice-frame field (mT) from numerical
/// diagonalization, sorted by `f_l`.
fn model_pairs(params: &NvParams, b: &Vector3<f64>) -> Result<[(f64, f64); 4]> {
    let mut out = [(0.0, 0.0); 4];
    for (i, slot) in out.iter_mut().enumerate() {
        let n = nv_axis(i);
        let par = params.gamma_mhz_per_mt * n.dot(b);
        let perp = params.gamma_mhz_per_mt * n.cross(b).norm();
        let [l0, l1, l2] = eig3_symmetric(&hamiltonian_from_components(params, perp, par))?;
        *slot = (l1 - l0, l2 - l0);
    }
    out.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(out)
}

/// Sum of squared differences between model and measured frequencies, with
/// both sets of pairs ordered by `f_l`.
pub fn frequency_ssr(params: &NvParams, b: &Vector3<f64>, measured: &[(f64, f64); 4]) -> Result<f64> {
    let model = model_pairs(params, b)?;
    Ok(model
        .iter()
        .zip(measured)
        .map(|(m, d)| (m.0 - d.0).powi(2) + (m.1 - d.1).powi(2))
        .sum())
}

fn gradient(params: &NvParams, b: &Vector3<f64>, measured: &[(f64, f64); 4]) -> Result<Vector3<f64>> {
    let mut g = Vector3::zeros();
    for k in 0..3 {
        let mut up = *b;
        let mut down = *b;
        up[k] += GRADIENT_STEP_MT;
        down[k] -= GRADIENT_STEP_MT;
        g[k] = (frequency_ssr(params, &up, measured)? - frequency_ssr(params, &down, measured)?) / (2.0 * GRADIENT_STEP_MT);
    }
    Ok(g)
}

/// Minimizes the frequency residual starting from `guess` (mT components).
pub fn numerical_baseline(pairs: &[ResonancePair; 4], params: &NvParams, guess: &Vector3<f64>) -> Result<BaselineResult> {
    if !guess.iter().all(|v| v.is_finite()) {
        return Err(Error::InvalidParameter("initial guess must be finite".into()));
    }
    let mut measured = pairs.map(|p| (p.f_l_mhz, p.f_u_mhz));
    measured.sort_by(|a, b| a.0.total_cmp(&b.0));

    let mut b = *guess;
    let mut cost = frequency_ssr(params, &b, &measured)?;
    let mut g = gradient(params, &b, &measured)?;
    let mut step = (0.1 * b.norm().max(1.0) / g.norm().max(1e-300)).min(1e-3);
    let mut prev: Option<(Vector3<f64>, Vector3<f64>)> = None;

    for it in 0..MAX_ITERATIONS {
        let gnorm = g.norm();
        if gnorm < GRADIENT_TOL || cost == 0.0 {
            return Ok(done(b, it, gnorm, cost));
        }
        if let Some((db, dg)) = prev {
            let sy = db.dot(&dg);
            if sy > 0.0 {
                step = db.norm_squared() / sy;
            }
        }

        let mut accepted = None;
        let mut alpha = step;
        while alpha > 1e-20 {
            let trial = b - g * alpha;
            let c = frequency_ssr(params, &trial, &measured)?;
            if c <= cost - ARMIJO_C * alpha * gnorm * gnorm {
                accepted = Some((trial, c));
                break;
            }
            alpha *= 0.5;
        }
        let Some((trial, c)) = accepted else {
            if gnorm < GRADIENT_FLOOR {
                return Ok(done(b, it, gnorm, cost));
            }
            return Err(Error::BaselineNotConverged { iterations: it, gradient_norm: gnorm });
        };
        let moved = (trial - b).norm();
        let g_new = gradient(params, &trial, &measured)?;
        prev = Some((trial - b, g_new - g));
        b = trial;
        cost = c;
        g = g_new;
        // short steps also come from backtracking at a kink of the sorted
        // residual, so they only count once the gradient is small too
        if moved < STEP_TOL_MT && g.norm() < GRADIENT_FLOOR {
            return Ok(done(b, it + 1, g.norm(), cost));
        }
    }
    let gnorm = g.norm();
    if gnorm < GRADIENT_FLOOR {
        return Ok(done(b, MAX_ITERATIONS, gnorm, cost));
    }
    Err(Error::BaselineNotConverged { iterations: MAX_ITERATIONS, gradient_norm: gnorm })
}

fn done(b: Vector3<f64>, iterations: usize, gradient_norm: f64, ssr_mhz2: f64) -> BaselineResult {
    BaselineResult { field: FieldVector::from_components(b), iterations, gradient_norm, ssr_mhz2 }
}
