//! Frame calibration from two measured coil fields.
//!
//! Two fields measured in lattice coordinates are matched to two known
//! lab-frame directions by the rotation minimizing the squared alignment
//! error (the two-vector Wahba problem, solved by SVD).

use nalgebra::{Matrix3, Vector3};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::reconstruct::angle_between;
use crate::symmetry::SymmetryGroup;

const PARALLEL_TOL_RAD: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Calibration {
    /// Maps measured (lattice) directions onto lab directions.
    pub rotation: Matrix3<f64>,
    /// Angle between the two measured fields.
    pub measured_angle_rad: f64,
    /// Angle between the two target directions.
    pub target_angle_rad: f64,
    /// Angle between each rotated measured field and its target.
    pub residual_rad: [f64; 2],
}

fn unit(v: &Vector3<f64>) -> Result<Vector3<f64>> {
    let n = v.norm();
    if !(n > 0.0 && n.is_finite()) {
        return Err(Error::DegenerateInput("calibration vectors must be finite and non-zero".into()));
    }
    Ok(v / n)
}

fn check_pair(a: &Vector3<f64>, b: &Vector3<f64>, what: &str) -> Result<f64> {
    let angle = angle_between(a, b);
    if angle < PARALLEL_TOL_RAD || std::f64::consts::PI - angle < PARALLEL_TOL_RAD {
        return Err(Error::DegenerateInput(format!("{what} vectors are parallel")));
    }
    Ok(angle)
}

/// Best-fit proper rotation taking `measured[i]` towards `target[i]`.
pub fn calibration_rotation(measured: [Vector3<f64>; 2], target: [Vector3<f64>; 2]) -> Result<Calibration> {
    let m = [unit(&measured[0])?, unit(&measured[1])?];
    let t = [unit(&target[0])?, unit(&target[1])?];
    let measured_angle_rad = check_pair(&m[0], &m[1], "measured")?;
    let target_angle_rad = check_pair(&t[0], &t[1], "target")?;

    let b = t[0] * m[0].transpose() + t[1] * m[1].transpose();
    let svd = b.svd(true, true);
    let (u, v_t) = match (svd.u, svd.v_t) {
        (Some(u), Some(v_t)) => (u, v_t),
        _ => return Err(Error::DegenerateInput("SVD of the attitude profile failed".into())),
    };
    let det = (u * v_t).determinant().signum();
    let rotation = u * Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, det)) * v_t;

    let residual_rad = [angle_between(&(rotation * m[0]), &t[0]), angle_between(&(rotation * m[1]), &t[1])];
    Ok(Calibration { rotation, measured_angle_rad, target_angle_rad, residual_rad })
}

/// Image of `second` under the cubic group whose angle to `first` is closest
/// to `target_angle_rad`. Returns the image, its angle and the group index;
/// earlier group elements (identity first) win ties.
pub fn best_image_for_angle(first: &Vector3<f64>, second: &Vector3<f64>, target_angle_rad: f64) -> (Vector3<f64>, f64, usize) {
    let group = SymmetryGroup::new();
    let mut best = (*second, angle_between(first, second), 0);
    for (k, g) in group.elements().iter().enumerate().skip(1) {
        let img = g * second;
        let a = angle_between(first, &img);
        if (a - target_angle_rad).abs() < (best.1 - target_angle_rad).abs() - 1e-12 {
            best = (img, a, k);
        }
    }
    best
}

/// All distinct angles between `first` and the images of `second`, ascending.
pub fn image_angles(first: &Vector3<f64>, second: &Vector3<f64>) -> Vec<f64> {
    let mut out: Vec<f64> = Vec::new();
    for g in SymmetryGroup::new().elements() {
        let a = angle_between(first, &(g * second));
        if out.iter().all(|x| (x - a).abs() > 1e-12) {
            out.push(a);
        }
    }
    out.sort_by(f64::total_cmp);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{Rotation3, Unit};

    #[test]
    fn identity_when_already_aligned() {
        let t = [Vector3::y(), Vector3::z()];
        let c = calibration_rotation(t, t).unwrap();
        assert!((c.rotation - Matrix3::identity()).amax() < 1e-12);
        assert!(c.residual_rad.iter().all(|r| *r < 1e-12));
        assert!((c.measured_angle_rad - std::f64::consts::FRAC_PI_2).abs() < 1e-15);
    }

    #[test]
    fn recovers_known_rotation() {
        let r = Rotation3::from_axis_angle(&Unit::new_normalize(Vector3::new(0.2, -1.0, 0.4)), 1.1);
        let t = [Vector3::new(0.0, 1.0, 0.0), Vector3::new(0.3, 0.2, 1.0)];
        let measured = [r.inverse() * t[0] * 2.0, r.inverse() * t[1] * 0.5];
        let c = calibration_rotation(measured, t).unwrap();
        assert!((c.rotation - r.matrix()).amax() < 1e-9);
        assert!((c.rotation.determinant() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn splits_misalignment_between_both_vectors() {
        // measured pair at 98°, target at 90°: both residuals ≈ 4°
        let a = 98f64.to_radians();
        let m = [Vector3::new(0.0, 1.0, 0.0), Vector3::new(0.0, a.cos(), a.sin())];
        let c = calibration_rotation(m, [Vector3::y(), Vector3::z()]).unwrap();
        for r in c.residual_rad {
            assert!((r.to_degrees() - 4.0).abs() < 1e-9);
        }
        assert!((c.rotation.determinant() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_parallel_vectors() {
        let m = [Vector3::x(), Vector3::x() * 3.0];
        assert!(matches!(calibration_rotation(m, [Vector3::y(), Vector3::z()]), Err(Error::DegenerateInput(_))));
        assert!(calibration_rotation([Vector3::x(), -Vector3::x()], [Vector3::y(), Vector3::z()]).is_err());
        assert!(calibration_rotation([Vector3::zeros(), Vector3::x()], [Vector3::y(), Vector3::z()]).is_err());
    }

    #[test]
    fn published_coil_fields() {
        let y = Vector3::new(0.74, 0.66, 0.14);
        let z = Vector3::new(0.81, 0.47, 0.34);
        // as printed, the two reconstructions are only ≈16° apart
        assert!((angle_between(&y, &z).to_degrees() - 16.4).abs() < 0.1);
        let (img, angle, k) = best_image_for_angle(&y, &z, std::f64::consts::FRAC_PI_2);
        assert!(k > 0);
        assert!((angle.to_degrees() - 89.43).abs() < 0.01, "{}", angle.to_degrees());
        let angles: Vec<f64> = image_angles(&y, &z).iter().map(|a| a.to_degrees()).collect();
        assert!(angles.iter().any(|a| (a - 98.02).abs() < 0.01), "{angles:?}");
        let c = calibration_rotation([y, img], [Vector3::y(), Vector3::z()]).unwrap();
        assert!(c.residual_rad.iter().all(|r| r.to_degrees() < 0.5));
    }

    #[test]
    fn identity_preferred_on_ties() {
        let a = Vector3::x();
        let (_, angle, k) = best_image_for_angle(&a, &Vector3::y(), std::f64::consts::FRAC_PI_2);
        assert_eq!(k, 0);
        assert_eq!(angle, std::f64::consts::FRAC_PI_2);
    }
}
