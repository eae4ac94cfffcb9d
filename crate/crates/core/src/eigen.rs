//! Cyclic Jacobi eigenvalue solver for real symmetric 3×3 matrices.
//!
//! This is deliberately a different algorithm from the closed-form cubic
//! roots in [`crate::forward`], so the two can be checked against each other.

use nalgebra::Matrix3;

use crate::error::{Error, Result};

const SYMMETRY_TOL: f64 = 1e-9;
const OFF_DIAGONAL_TOL: f64 = 1e-13;
const MAX_SWEEPS: usize = 64;

/// Eigenvalues of a symmetric 3×3 matrix in ascending order.
pub fn eig3_symmetric(m: &Matrix3<f64>) -> Result<[f64; 3]> {
    let scale = m.amax();
    if !scale.is_finite() {
        return Err(Error::InvalidParameter("matrix has non-finite entries".into()));
    }
    if scale == 0.0 {
        return Ok([0.0; 3]);
    }
    let asymmetry = (m - m.transpose()).amax();
    if asymmetry > SYMMETRY_TOL * scale {
        return Err(Error::NonSymmetric { asymmetry });
    }

    let mut a = [[0.0f64; 3]; 3];
    for (i, row) in a.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            *v = 0.5 * (m[(i, j)] + m[(j, i)]);
        }
    }

    let target = OFF_DIAGONAL_TOL * scale;
    for _ in 0..MAX_SWEEPS {
        let off = (2.0 * (a[0][1].powi(2) + a[0][2].powi(2) + a[1][2].powi(2))).sqrt();
        if off <= target {
            break;
        }
        for (p, q) in [(0, 1), (0, 2), (1, 2)] {
            rotate(&mut a, p, q);
        }
    }

    let mut ev = [a[0][0], a[1][1], a[2][2]];
    ev.sort_by(|x, y| x.total_cmp(y));
    Ok(ev)
}

/// One Jacobi rotation annihilating `a[p][q]`.
fn rotate(a: &mut [[f64; 3]; 3], p: usize, q: usize) {
    let apq = a[p][q];
    if apq == 0.0 {
        return;
    }
    let app = a[p][p];
    let aqq = a[q][q];
    let theta = (aqq - app) / (2.0 * apq);
    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
    let c = 1.0 / (t * t + 1.0).sqrt();
    let s = t * c;

    a[p][p] = app - t * apq;
    a[q][q] = aqq + t * apq;
    a[p][q] = 0.0;
    a[q][p] = 0.0;

    let r = 3 - p - q;
    let arp = a[r][p];
    let arq = a[r][q];
    a[r][p] = c * arp - s * arq;
    a[p][r] = a[r][p];
    a[r][q] = s * arp + c * arq;
    a[q][r] = a[r][q];
}

/// Determinant of `m - lambda I`.
pub fn shifted_determinant(m: &Matrix3<f64>, lambda: f64) -> f64 {
    (m - Matrix3::identity() * lambda).determinant()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_symmetric(rng: &mut ChaCha8Rng) -> Matrix3<f64> {
        let mut m = Matrix3::zeros();
        for i in 0..3 {
            for j in i..3 {
                let v: f64 = rng.random_range(-10.0..10.0);
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        m
    }

    /// Roots of det(m - λI) by sign-change bisection on a fine scan.
    fn bisection_roots(m: &Matrix3<f64>) -> Vec<f64> {
        let bound = 3.0 * m.amax() + 1.0;
        let n = 20_000;
        let step = 2.0 * bound / n as f64;
        let mut roots = Vec::new();
        let mut lo = -bound;
        let mut flo = shifted_determinant(m, lo);
        for k in 1..=n {
            let hi = -bound + k as f64 * step;
            let fhi = shifted_determinant(m, hi);
            if flo == 0.0 {
                roots.push(lo);
            } else if flo * fhi < 0.0 {
                let (mut a, mut b, mut fa) = (lo, hi, flo);
                for _ in 0..200 {
                    let mid = 0.5 * (a + b);
                    let fm = shifted_determinant(m, mid);
                    if fa * fm <= 0.0 {
                        b = mid;
                    } else {
                        a = mid;
                        fa = fm;
                    }
                }
                roots.push(0.5 * (a + b));
            }
            lo = hi;
            flo = fhi;
        }
        roots
    }

    #[test]
    fn diagonal_matrix() {
        let m = Matrix3::from_diagonal(&nalgebra::Vector3::new(3.0, 1.0, 2.0));
        assert_eq!(eig3_symmetric(&m).unwrap(), [1.0, 2.0, 3.0]);
    }

    #[test]
    fn zero_field_shifted_hamiltonian() {
        let d = 2870.0;
        let m = Matrix3::from_diagonal(&nalgebra::Vector3::new(d / 3.0, -2.0 * d / 3.0, d / 3.0));
        let ev = eig3_symmetric(&m).unwrap();
        assert_eq!(ev, [-2.0 * d / 3.0, d / 3.0, d / 3.0]);
    }

    #[test]
    fn rejects_non_symmetric() {
        let mut m = Matrix3::identity();
        m[(0, 1)] = 1e-3;
        assert!(matches!(eig3_symmetric(&m), Err(Error::NonSymmetric { .. })));
    }

    #[test]
    fn zero_matrix() {
        assert_eq!(eig3_symmetric(&Matrix3::zeros()).unwrap(), [0.0; 3]);
    }

    #[test]
    fn matches_bisection_on_random_matrices() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let m = random_symmetric(&mut rng);
            let roots = bisection_roots(&m);
            let ev = eig3_symmetric(&m).unwrap();
            // degenerate spectra would show fewer sign changes; random draws avoid them
            assert_eq!(roots.len(), 3, "{m}");
            for (r, e) in roots.iter().zip(ev) {
                assert!((r - e).abs() <= 1e-9 * m.amax(), "{r} vs {e}");
            }
            let scale = m.amax().powi(3);
            for e in ev {
                assert!(shifted_determinant(&m, e).abs() <= 1e-6 * scale);
            }
        }
    }

    #[test]
    fn invariant_under_orthogonal_conjugation() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let m = random_symmetric(&mut rng);
            let axis = nalgebra::Vector3::new(
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
            );
            let angle = rng.random_range(0.0..std::f64::consts::TAU);
            let r = nalgebra::Rotation3::from_axis_angle(&nalgebra::Unit::new_normalize(axis), angle);
            let rm = r.matrix() * m * r.matrix().transpose();
            let rm = 0.5 * (rm + rm.transpose());
            let a = eig3_symmetric(&m).unwrap();
            let b = eig3_symmetric(&rm).unwrap();
            for (x, y) in a.iter().zip(b) {
                assert!((x - y).abs() <= 1e-9 * m.amax());
            }
        }
    }
}
