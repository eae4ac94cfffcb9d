//! Independent numerical oracles shared by the integration tests.
//!
//! Nothing here calls into the crate's special-function or eigen code: the
//! Voigt profile is a direct convolution, the Faddeeva function a Laplace
//! integral or its asymptotic series, and eigenvalues come from nalgebra.

#![allow(dead_code)]

use std::f64::consts::PI;

use nalgebra::{Matrix3, SymmetricEigen};
use num_complex::Complex64;

// 15-point Kronrod nodes on [0, 1] (symmetric), with the embedded 7-point
// Gauss rule on the odd nodes.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let pair = f(c - h * XGK[j]) + f(c + h * XGK[j]);
        kronrod += WGK[j] * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    (kronrod * h, ((kronrod - gauss) * h).abs())
}

/// Adaptive Gauss–Kronrod quadrature over `[a, b]` split at `breaks`.
pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, breaks: &[f64], abs_tol: f64, rel_tol: f64) -> f64 {
    let mut edges = vec![a];
    let mut inner: Vec<f64> = breaks.iter().copied().filter(|x| *x > a && *x < b).collect();
    inner.sort_by(f64::total_cmp);
    edges.extend(inner);
    edges.push(b);

    let mut pieces: Vec<(f64, f64, f64, f64)> = edges
        .windows(2)
        .map(|w| {
            let (v, e) = gk15(&f, w[0], w[1]);
            (w[0], w[1], v, e)
        })
        .collect();
    for _ in 0..20_000 {
        let total: f64 = pieces.iter().map(|p| p.2).sum();
        let err: f64 = pieces.iter().map(|p| p.3).sum();
        if err <= abs_tol.max(rel_tol * total.abs()) {
            break;
        }
        let (k, _) = pieces
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .expect("non-empty");
        let (lo, hi, _, _) = pieces.swap_remove(k);
        let mid = 0.5 * (lo + hi);
        let (v1, e1) = gk15(&f, lo, mid);
        let (v2, e2) = gk15(&f, mid, hi);
        pieces.push((lo, mid, v1, e1));
        pieces.push((mid, hi, v2, e2));
    }
    pieces.iter().map(|p| p.2).sum()
}

/// `w(z)` for `Im z ≥ 0`.
///
/// For `|z| < 8` it integrates `w(z) = π^{-1/2} ∫₀^∞ exp(−s²/4 + i z s) ds`,
/// whose integrand is smooth and decays like a Gaussian. Further out it sums
/// the asymptotic series `i/(√π z) Σ (2n−1)!!/(2z²)ⁿ`, which at `|z| ≥ 8` is
/// accurate far beyond double precision after 20 terms.
pub fn faddeeva_oracle(z: Complex64) -> Complex64 {
    if z.norm() >= 8.0 {
        let inv2z2 = 1.0 / (2.0 * z * z);
        let mut term = Complex64::new(1.0, 0.0);
        let mut sum = term;
        for n in 1..=20 {
            term *= inv2z2 * (2 * n - 1) as f64;
            sum += term;
        }
        return Complex64::i() * sum / (PI.sqrt() * z);
    }
    let upper = 14.0;
    let integrand = |s: f64| (Complex64::new(-0.25 * s * s, 0.0) + Complex64::i() * z * s).exp();
    let re = integrate(|s| integrand(s).re, 0.0, upper, &[], 1e-16, 1e-14);
    let im = integrate(|s| integrand(s).im, 0.0, upper, &[], 1e-16, 1e-14);
    Complex64::new(re, im) / PI.sqrt()
}

/// Area-normalized Voigt profile by direct convolution of a Gaussian (std
/// `sigma`) with a Lorentzian (half width `nu`).
pub fn voigt_convolution(x: f64, sigma: f64, nu: f64) -> f64 {
    if sigma == 0.0 {
        return nu / (PI * (x * x + nu * nu));
    }
    if nu == 0.0 {
        return (-(x * x) / (2.0 * sigma * sigma)).exp() / (sigma * (2.0 * PI).sqrt());
    }
    let gauss = |t: f64| (-(t * t) / (2.0 * sigma * sigma)).exp() / (sigma * (2.0 * PI).sqrt());
    let lorentz = |u: f64| nu / (PI * (u * u + nu * nu));
    let reach = 12.0 * sigma;
    integrate(|t| gauss(t) * lorentz(x - t), -reach, reach, &[0.0, x, x - nu, x + nu], 1e-18, 1e-13)
}

/// Half-maximum width of a symmetric, unimodal profile centred at 0, by
/// bisection on `profile(x) = profile(0)/2`.
pub fn fwhm_by_bisection(profile: impl Fn(f64) -> f64, guess: f64) -> f64 {
    let half = 0.5 * profile(0.0);
    let mut hi = guess.max(1e-12);
    while profile(hi) > half {
        hi *= 2.0;
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if profile(mid) > half {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    lo + hi
}

/// Ascending eigenvalues from nalgebra's symmetric QR solver.
pub fn reference_eigenvalues(m: &Matrix3<f64>) -> [f64; 3] {
    let mut ev: Vec<f64> = SymmetricEigen::new(*m).eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    [ev[0], ev[1], ev[2]]
}

#[cfg(test)]
mod tests {
    #![allow(unused_imports)]
    use super::*;

    #[test]
    fn quadrature_on_known_integrals() {
        let v = integrate(|x| x.sin(), 0.0, PI, &[], 1e-15, 1e-14);
        assert!((v - 2.0).abs() < 1e-13);
        let v = integrate(|x| 1.0 / (x * x + 1e-6), -1.0, 1.0, &[0.0], 1e-15, 1e-13);
        assert!((v - 2.0 * 1e3 * (1e3f64).atan()).abs() < 1e-8);
    }
}
