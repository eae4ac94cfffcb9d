//! The 48-element cubic point group.
//!
//! Four-axis ODMR only sees `|n̂_i · b̂|`, which every signed permutation of
//! the lattice coordinates preserves. Any reconstructed direction is
//! therefore known only up to this group.

use nalgebra::{Matrix3, Vector3};

use crate::reconstruct::{angle_between, FieldVector};

const DEDUP_TOL: f64 = 1e-12;

const PERMUTATIONS: [[usize; 3]; 6] = [[0, 1, 2], [1, 2, 0], [2, 0, 1], [1, 0, 2], [2, 1, 0], [0, 2, 1]];

/// All signed 3×3 permutation matrices, identity first.
#[derive(Clone, Debug)]
pub struct SymmetryGroup {
    elements: Vec<Matrix3<f64>>,
}

impl Default for SymmetryGroup {
    fn default() -> Self {
        Self::new()
    }
}

impl SymmetryGroup {
    pub fn new() -> Self {
        let mut elements = Vec::with_capacity(48);
        for perm in PERMUTATIONS {
            for bits in 0..8u8 {
                let mut m = Matrix3::zeros();
                for (row, &col) in perm.iter().enumerate() {
                    m[(row, col)] = if bits >> (2 - row) & 1 == 0 { 1.0 } else { -1.0 };
                }
                elements.push(m);
            }
        }
        Self { elements }
    }

    pub fn elements(&self) -> &[Matrix3<f64>] {
        &self.elements
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    /// Index of `m` in the group, if it is an element.
    pub fn index_of(&self, m: &Matrix3<f64>) -> Option<usize> {
        self.elements.iter().position(|g| (g - m).amax() < 1e-12)
    }
}

/// Distinct images of `v` under the group, in group order.
pub fn symmetry_images(v: &FieldVector) -> Vec<FieldVector> {
    let group = SymmetryGroup::new();
    let mut out: Vec<FieldVector> = Vec::with_capacity(48);
    for g in group.elements() {
        let b_hat = g * v.b_hat;
        if out.iter().all(|w| (w.b_hat - b_hat).amax() > DEDUP_TOL) {
            out.push(FieldVector { b_hat, ..*v });
        }
    }
    out
}

/// Smallest angle (rad) between `b` and any image of `a`, with the index of
/// that group element.
pub fn orbit_distance(a: &Vector3<f64>, b: &Vector3<f64>) -> (f64, usize) {
    SymmetryGroup::new()
        .elements()
        .iter()
        .enumerate()
        .map(|(k, g)| (angle_between(&(g * a), b), k))
        .fold((f64::INFINITY, 0), |best, cur| if cur.0 < best.0 { cur } else { best })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forward::NV_AXES;

    fn fv(x: f64, y: f64, z: f64) -> FieldVector {
        FieldVector::from_components(Vector3::new(x, y, z))
    }

    #[test]
    fn group_axioms() {
        let g = SymmetryGroup::new();
        assert_eq!(g.len(), 48);
        assert_eq!(g.elements()[0], Matrix3::identity());
        assert!(g.index_of(&(-Matrix3::identity())).is_some());
        for a in g.elements() {
            assert_eq!(a * a.transpose(), Matrix3::identity());
            for b in g.elements() {
                assert!(g.index_of(&(a * b)).is_some());
            }
        }
        for (i, a) in g.elements().iter().enumerate() {
            for b in &g.elements()[i + 1..] {
                assert_ne!(a, b);
            }
        }
    }

    #[test]
    fn preserves_cone_angles() {
        let g = SymmetryGroup::new();
        let v = Vector3::new(0.3, -0.7, 0.2).normalize();
        let cones = |u: &Vector3<f64>| {
            let mut c: Vec<f64> = NV_AXES.iter().map(|n| Vector3::from(*n).dot(u).abs()).collect();
            c.sort_by(f64::total_cmp);
            c
        };
        for m in g.elements() {
            let a = cones(&v);
            let b = cones(&(m * v));
            for (x, y) in a.iter().zip(&b) {
                assert!((x - y).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn orbit_sizes() {
        assert_eq!(symmetry_images(&fv(1.0, 0.0, 0.0)).len(), 6);
        assert_eq!(symmetry_images(&fv(1.0, 1.0, 1.0)).len(), 8);
        assert_eq!(symmetry_images(&fv(1.0, 1.0, 0.0)).len(), 12);
        assert_eq!(symmetry_images(&fv(0.1, 0.5, 0.8)).len(), 48);
    }

    #[test]
    fn images_keep_magnitude_and_identity_first() {
        let v = fv(3.0, -1.0, 2.0);
        let imgs = symmetry_images(&v);
        assert_eq!(imgs[0], v);
        assert!(imgs.iter().all(|w| w.b_mt == v.b_mt));
    }

    #[test]
    fn orbit_distance_finds_element() {
        let g = SymmetryGroup::new();
        let a = Vector3::new(0.1, 0.5, 0.8).normalize();
        let b = g.elements()[29] * a;
        let (d, k) = orbit_distance(&a, &b);
        assert!(d < 1e-15);
        assert_eq!(k, 29);
    }
}
