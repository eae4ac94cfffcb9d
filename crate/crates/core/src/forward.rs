//! Resonance frequencies from a known field.

use std::f64::consts::TAU;

use nalgebra::Vector3;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{cubic_coeffs, CubicCoeffs, FieldPolar, NvParams};
use crate::reconstruct::FieldVector;

const ARCCOS_CLAMP_TOL: f64 = 1e-9;
const FRAC_1_SQRT_3: f64 = 0.577_350_269_189_625_8;

/// NV axes along [111], [-1-11], [-11-1] and [1-1-1] in lattice coordinates.
pub const NV_AXES: [[f64; 3]; 4] = [
    [FRAC_1_SQRT_3, FRAC_1_SQRT_3, FRAC_1_SQRT_3],
    [-FRAC_1_SQRT_3, -FRAC_1_SQRT_3, FRAC_1_SQRT_3],
    [-FRAC_1_SQRT_3, FRAC_1_SQRT_3, -FRAC_1_SQRT_3],
    [FRAC_1_SQRT_3, -FRAC_1_SQRT_3, -FRAC_1_SQRT_3],
];

pub fn nv_axis(i: usize) -> Vector3<f64> {
    Vector3::from(NV_AXES[i])
}

/// Lower and upper spin-resonance frequency of one NV axis.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ResonancePair {
    pub f_l_mhz: f64,
    pub f_u_mhz: f64,
    pub sigma_l_mhz: f64,
    pub sigma_u_mhz: f64,
}

impl ResonancePair {
    pub fn new(f_l_mhz: f64, f_u_mhz: f64, sigma_l_mhz: f64, sigma_u_mhz: f64) -> Result<Self> {
        if !(f_l_mhz.is_finite() && f_u_mhz.is_finite()) {
            return Err(Error::InvalidParameter("resonance frequencies must be finite".into()));
        }
        if f_l_mhz <= 0.0 || f_l_mhz > f_u_mhz {
            return Err(Error::InvalidParameter(format!(
                "resonance pair must satisfy 0 < f_l <= f_u, got ({f_l_mhz}, {f_u_mhz})"
            )));
        }
        if !(sigma_l_mhz >= 0.0 && sigma_u_mhz >= 0.0) {
            return Err(Error::InvalidParameter("resonance uncertainties must be >= 0".into()));
        }
        Ok(Self { f_l_mhz, f_u_mhz, sigma_l_mhz, sigma_u_mhz })
    }

    /// Noise-free pair; no validation.
    pub fn exact(f_l_mhz: f64, f_u_mhz: f64) -> Self {
        Self { f_l_mhz, f_u_mhz, sigma_l_mhz: 0.0, sigma_u_mhz: 0.0 }
    }

    pub fn with_sigma(mut self, sigma_mhz: f64) -> Self {
        self.sigma_l_mhz = sigma_mhz;
        self.sigma_u_mhz = sigma_mhz;
        self
    }

    pub fn splitting_mhz(&self) -> f64 {
        self.f_u_mhz - self.f_l_mhz
    }
}

/// Real roots of `λ³ + pλ + q` in ascending order (trigonometric form).
pub fn viete_roots(c: CubicCoeffs) -> Result<[f64; 3]> {
    let CubicCoeffs { p, q } = c;
    if !(p.is_finite() && q.is_finite()) {
        return Err(Error::InvalidParameter("cubic coefficients must be finite".into()));
    }
    if p >= 0.0 {
        if p == 0.0 && q == 0.0 {
            return Ok([0.0; 3]);
        }
        return Err(Error::InvalidParameter(format!("trigonometric roots need p < 0, got {p}")));
    }

    let mut arg = -1.5 * 3f64.sqrt() * q / (-p).powi(3).sqrt();
    if arg.abs() > 1.0 {
        if arg.abs() > 1.0 + ARCCOS_CLAMP_TOL {
            return Err(Error::DiscriminantViolation { argument: arg });
        }
        arg = arg.clamp(-1.0, 1.0);
    }
    let phi = arg.acos() / 3.0;
    let r = 2.0 * (-p / 3.0).sqrt();
    // k = 0 is the largest root, k = 2 the smallest
    Ok([
        r * (phi - 2.0 * TAU / 3.0).cos(),
        r * (phi - TAU / 3.0).cos(),
        r * phi.cos(),
    ])
}

/// Resonance pair of one NV axis: `f_l = λ₁ − λ₀`, `f_u = λ₂ − λ₀`.
pub fn resonances(params: &NvParams, field: &FieldPolar) -> Result<ResonancePair> {
    let [l0, l1, l2] = viete_roots(cubic_coeffs(params, field))?;
    Ok(ResonancePair::exact(l1 - l0, l2 - l0))
}

/// Polar form of a lattice-frame field relative to NV axis `axis`.
///
/// θ is measured to the nearer of `±n̂`, so it lands in `[0, π/2]`.
pub fn axis_polar(params: &NvParams, b: &FieldVector, axis: usize) -> Result<FieldPolar> {
    let n = nv_axis(axis);
    let dot = n.dot(&b.b_hat).abs();
    let cross = n.cross(&b.b_hat).norm();
    FieldPolar::new(params, b.b_mt, cross.atan2(dot))
}

/// Resonance pairs of all four NV axes, in axis order.
pub fn resonances_all_axes(params: &NvParams, b: &FieldVector) -> Result<[ResonancePair; 4]> {
    let mut out = [ResonancePair::exact(0.0, 0.0); 4];
    for (i, slot) in out.iter_mut().enumerate() {
        *slot = resonances(params, &axis_polar(params, b, i)?)?;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eigen::eig3_symmetric;
    use crate::model::assemble_hamiltonian;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::f64::consts::FRAC_PI_2;

    fn params(e: f64) -> NvParams {
        NvParams::new(2870.0, e, 28.032).unwrap()
    }

    #[test]
    fn factored_cubic() {
        let r = viete_roots(CubicCoeffs { p: -3.0, q: 2.0 }).unwrap();
        assert_relative_eq!(r[0], -2.0, epsilon = 1e-12);
        assert_relative_eq!(r[1], 1.0, epsilon = 1e-7);
        assert_relative_eq!(r[2], 1.0, epsilon = 1e-7);
    }

    #[test]
    fn zero_field_roots() {
        let p = params(0.0);
        let r = viete_roots(cubic_coeffs(&p, &FieldPolar::new(&p, 0.0, 0.0).unwrap())).unwrap();
        let d = 2870.0;
        assert_relative_eq!(r[0], -2.0 * d / 3.0, max_relative = 1e-12);
        assert_relative_eq!(r[1], d / 3.0, max_relative = 1e-7);
        assert_relative_eq!(r[2], d / 3.0, max_relative = 1e-7);
    }

    #[test]
    fn roots_match_jacobi_at_magic_angle() {
        let p = params(5.0);
        let f = FieldPolar::from_effective(&p, 280.32, 54.7356f64.to_radians()).unwrap();
        let v = viete_roots(cubic_coeffs(&p, &f)).unwrap();
        let j = eig3_symmetric(&assemble_hamiltonian(&p, &f, None)).unwrap();
        for (a, b) in v.iter().zip(j) {
            assert!((a - b).abs() <= 1e-9 * v[0].abs());
        }
    }

    #[test]
    fn discriminant_violation() {
        // (3√3/2)·q/√(−p³) = 2 for p = −3
        let err = viete_roots(CubicCoeffs { p: -3.0, q: 4.0 }).unwrap_err();
        assert!(matches!(err, Error::DiscriminantViolation { .. }));
        // marginally outside: clamped
        let q = 2.0 * (1.0 + 1e-12);
        assert!(viete_roots(CubicCoeffs { p: -3.0, q }).is_ok());
    }

    #[test]
    fn zero_field_resonances() {
        let p = params(0.0);
        let r = resonances(&p, &FieldPolar::new(&p, 0.0, 0.0).unwrap()).unwrap();
        assert_relative_eq!(r.f_l_mhz, 2870.0, max_relative = 1e-7);
        assert_relative_eq!(r.f_u_mhz, 2870.0, max_relative = 1e-7);
    }

    #[test]
    fn aligned_field_resonances() {
        let p = params(0.0);
        let r = resonances(&p, &FieldPolar::new(&p, 10.0, 0.0).unwrap()).unwrap();
        assert_relative_eq!(r.f_l_mhz, 2589.68, max_relative = 1e-12);
        assert_relative_eq!(r.f_u_mhz, 3150.32, max_relative = 1e-12);

        let p5 = params(5.0);
        let r = resonances(&p5, &FieldPolar::new(&p5, 10.0, 0.0).unwrap()).unwrap();
        let split = (280.32f64.powi(2) + 25.0).sqrt();
        assert_relative_eq!(split, 280.3646, max_relative = 1e-7);
        assert_relative_eq!(r.f_l_mhz, 2870.0 - split, max_relative = 1e-12);
        assert_relative_eq!(r.f_u_mhz, 2870.0 + split, max_relative = 1e-12);
    }

    #[test]
    fn field_along_first_axis() {
        let p = params(0.0);
        let b = FieldVector::from_components(Vector3::new(1.0, 1.0, 1.0) * (10.0 / 3f64.sqrt()));
        let pairs = resonances_all_axes(&p, &b).unwrap();
        assert_relative_eq!(pairs[0].f_l_mhz, 2589.68, max_relative = 1e-12);
        assert_relative_eq!(pairs[0].f_u_mhz, 3150.32, max_relative = 1e-12);
        let oblique = resonances(&p, &FieldPolar::new(&p, 10.0, (1.0f64 / 3.0).acos()).unwrap()).unwrap();
        for pair in &pairs[1..] {
            assert_relative_eq!(pair.f_l_mhz, oblique.f_l_mhz, max_relative = 1e-12);
            assert_relative_eq!(pair.f_u_mhz, oblique.f_u_mhz, max_relative = 1e-12);
        }
    }

    #[test]
    fn zero_field_all_axes() {
        let p = params(5.0);
        let b = FieldVector::from_components(Vector3::zeros());
        for pair in resonances_all_axes(&p, &b).unwrap() {
            assert_relative_eq!(pair.f_l_mhz, 2865.0, max_relative = 1e-9);
            assert_relative_eq!(pair.f_u_mhz, 2875.0, max_relative = 1e-9);
        }
    }

    #[test]
    fn random_direction_matches_numerical_eigensolve() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let p = params(3.0);
        for _ in 0..20 {
            let v = Vector3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            let b = FieldVector::from_components(v.normalize() * 5.0);
            let pairs = resonances_all_axes(&p, &b).unwrap();
            for (i, pair) in pairs.iter().enumerate() {
                let n = nv_axis(i);
                let par = p.gamma_mhz_per_mt * b.b_mt * n.dot(&b.b_hat);
                let perp = p.gamma_mhz_per_mt * b.b_mt * n.cross(&b.b_hat).norm();
                let h = crate::model::hamiltonian_from_components(&p, perp, par);
                let [l0, l1, l2] = eig3_symmetric(&h).unwrap();
                assert_relative_eq!(pair.f_l_mhz, l1 - l0, max_relative = 1e-10);
                assert_relative_eq!(pair.f_u_mhz, l2 - l0, max_relative = 1e-10);
            }
        }
    }

    #[test]
    fn splitting_grows_with_field() {
        let p = params(5.0);
        for theta_deg in [0.0, 10.0, 30.0, 54.7, 70.0, 89.0, 90.0] {
            let mut last = 0.0;
            for k in 0..=200 {
                let b = k as f64 * 0.5;
                let f = FieldPolar::new(&p, b, f64::to_radians(theta_deg)).unwrap();
                let r = resonances(&p, &f).unwrap();
                let split = r.splitting_mhz();
                assert!(split >= last - 1e-9, "θ={theta_deg} B={b}");
                last = split;
            }
        }
    }

    proptest! {
        #[test]
        fn roots_sum_to_zero(e in 0.0f64..20.0, b in 0.0f64..300.0, theta in 0.0f64..FRAC_PI_2) {
            let p = params(e);
            let r = viete_roots(cubic_coeffs(&p, &FieldPolar::new(&p, b, theta).unwrap())).unwrap();
            let m = r.iter().fold(0.0f64, |a, x| a.max(x.abs()));
            prop_assert!((r[0] + r[1] + r[2]).abs() <= 1e-9 * m);
            prop_assert!(r[0] <= r[1] && r[1] <= r[2]);
        }

        #[test]
        fn symmetric_under_angle_reflection(e in 0.0f64..20.0, b in 0.0f64..300.0, theta in 0.0f64..FRAC_PI_2) {
            let p = params(e);
            let r = resonances(&p, &FieldPolar::new(&p, b, theta).unwrap()).unwrap();
            for t in [-theta, std::f64::consts::PI - theta] {
                let s = resonances(&p, &FieldPolar::new(&p, b, t).unwrap()).unwrap();
                prop_assert!((r.f_l_mhz - s.f_l_mhz).abs() <= 1e-9 * r.f_u_mhz);
                prop_assert!((r.f_u_mhz - s.f_u_mhz).abs() <= 1e-9 * r.f_u_mhz);
            }
        }
    }
}
