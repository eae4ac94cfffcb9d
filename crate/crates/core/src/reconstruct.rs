//! Field vector from the four NV cone angles.
//!
//! With `c_i = ±cos θ_i` and the axis matrix `N` (rows `n̂_i`), the field
//! direction solves the overdetermined system `N b = c`. Each of the 2⁴ sign
//! choices gives a least-squares candidate; the one with the smallest
//! residual sum of squares is kept.

use nalgebra::{Matrix3, Matrix4x3, Vector3, Vector4};
use serde::Serialize;

use crate::eigen::eig3_symmetric;
use crate::error::{Error, Result};
use crate::forward::{ResonancePair, NV_AXES};
use crate::inverse::{measure_axis, AxisMeasurement, SpectralLine};
use crate::model::NvParams;

const SSR_TIE_TOL: f64 = 1e-12;
const MAX_CONDITION: f64 = 1e12;
const DUPLICATE_LINE_TOL_MHZ: f64 = 1e-9;

/// A field in lattice coordinates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FieldVector {
    pub b_mt: f64,
    /// Unit vector; `+z` by convention when the field is zero.
    pub b_hat: Vector3<f64>,
    pub ssr: f64,
    pub signs: SignTuple,
}

impl FieldVector {
    pub fn from_components(b_mt: Vector3<f64>) -> Self {
        let norm = b_mt.norm();
        let b_hat = if norm > 0.0 { b_mt / norm } else { Vector3::z() };
        Self { b_mt: norm, b_hat, ssr: 0.0, signs: SignTuple::default() }
    }

    pub fn components(&self) -> Vector3<f64> {
        self.b_hat * self.b_mt
    }
}

/// Angle (rad) between two directions, accurate for nearly parallel vectors.
pub fn angle_between(a: &Vector3<f64>, b: &Vector3<f64>) -> f64 {
    a.cross(b).norm().atan2(a.dot(b))
}

/// Signs applied to the four `cos θ_i`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct SignTuple(pub [i8; 4]);

impl Default for SignTuple {
    fn default() -> Self {
        SignTuple([1; 4])
    }
}

impl SignTuple {
    /// All 16 tuples, lexicographic with `+` ordered before `−`.
    pub fn all() -> [SignTuple; 16] {
        std::array::from_fn(|k| {
            SignTuple(std::array::from_fn(|i| if (k >> (3 - i)) & 1 == 0 { 1 } else { -1 }))
        })
    }

    pub fn negated(self) -> SignTuple {
        SignTuple(self.0.map(|s| -s))
    }
}

impl std::fmt::Display for SignTuple {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for s in self.0 {
            f.write_str(if s > 0 { "+" } else { "-" })?;
        }
        Ok(())
    }
}

/// Per-axis cone data consumed by the reconstruction.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ConeSet {
    pub cos_theta: [f64; 4],
    pub var_cos: [f64; 4],
    pub b_mt: [f64; 4],
    pub var_b: [f64; 4],
}

impl ConeSet {
    pub fn new(cos_theta: [f64; 4], var_cos: [f64; 4], b_mt: [f64; 4], var_b: [f64; 4]) -> Result<Self> {
        if cos_theta.iter().any(|c| !(0.0..=1.0).contains(c)) {
            return Err(Error::InvalidParameter("cos θ values must lie in [0, 1]".into()));
        }
        if var_cos.iter().chain(&var_b).any(|v| !(*v >= 0.0)) {
            return Err(Error::InvalidParameter("cone variances must be >= 0".into()));
        }
        if b_mt.iter().any(|b| !(*b >= 0.0 && b.is_finite())) {
            return Err(Error::InvalidParameter("cone magnitudes must be finite and >= 0".into()));
        }
        Ok(Self { cos_theta, var_cos, b_mt, var_b })
    }

    pub fn from_measurements(params: &NvParams, m: &[AxisMeasurement; 4]) -> Result<Self> {
        Self::new(
            m.map(|a| a.cos_theta()),
            m.map(|a| a.var_cos_theta()),
            m.map(|a| a.b_mt(params)),
            m.map(|a| a.var_b_mt(params)),
        )
    }

    /// Exact cones of a known field (zero variances).
    pub fn from_field(b: &FieldVector) -> Self {
        let cos_theta = std::array::from_fn(|i| Vector3::from(NV_AXES[i]).dot(&b.b_hat).abs().min(1.0));
        Self { cos_theta, var_cos: [0.0; 4], b_mt: [b.b_mt; 4], var_b: [0.0; 4] }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ReconstructOptions {
    /// Weight each cone by `1/σ²` of its `cos θ`.
    pub weighted: bool,
    /// Solve with three cones only, ignoring this axis.
    pub dropped_axis: Option<usize>,
}

/// Least-squares solution for one sign tuple.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BlueSolution {
    pub b_hat: Vector3<f64>,
    /// Unnormalized estimator; its length is ≈1 for consistent cones.
    pub raw: Vector3<f64>,
    pub ssr: f64,
}

fn axis_matrix() -> Matrix4x3<f64> {
    Matrix4x3::from_fn(|i, j| NV_AXES[i][j])
}

fn weights(cones: &ConeSet, opts: &ReconstructOptions) -> Result<Vector4<f64>> {
    let mut w = Vector4::repeat(1.0);
    if opts.weighted {
        for i in 0..4 {
            if opts.dropped_axis == Some(i) {
                continue;
            }
            let v = cones.var_cos[i];
            if !(v > 0.0) {
                return Err(Error::InvalidParameter(format!("weighted solve needs cos θ variance > 0 on axis {i}")));
            }
            w[i] = 1.0 / v;
        }
    }
    if let Some(k) = opts.dropped_axis {
        if k >= 4 {
            return Err(Error::InvalidParameter(format!("no NV axis {k}")));
        }
        w[k] = 0.0;
    }
    Ok(w)
}

/// Least-squares direction for one sign tuple.
///
/// Unweighted four-cone solves use the closed form `b = (3/4) Nᵀc`, valid
/// because `NᵀN = (4/3) I`; otherwise the normal equations
/// `(NᵀWN) b = NᵀWc` are solved.
pub fn blue_solve(cones: &ConeSet, signs: SignTuple, opts: &ReconstructOptions) -> Result<BlueSolution> {
    let n = axis_matrix();
    let c = Vector4::from_fn(|i, _| f64::from(signs.0[i]) * cones.cos_theta[i]);
    let w = weights(cones, opts)?;

    let raw = if !opts.weighted && opts.dropped_axis.is_none() {
        n.transpose() * c * 0.75
    } else {
        let nw = Matrix4x3::from_fn(|i, j| n[(i, j)] * w[i]);
        let normal: Matrix3<f64> = n.transpose() * nw;
        let ev = eig3_symmetric(&normal)?;
        let condition = if ev[0] > 0.0 { ev[2] / ev[0] } else { f64::INFINITY };
        if condition > MAX_CONDITION {
            return Err(Error::SingularNormalMatrix { condition });
        }
        let inv = normal.try_inverse().ok_or(Error::SingularNormalMatrix { condition })?;
        inv * (nw.transpose() * c)
    };

    let r = c - n * raw;
    let ssr = (0..4).map(|i| w[i] * r[i] * r[i]).sum();
    let norm = raw.norm();
    if norm < 1e-12 {
        return Err(Error::DegenerateSolution);
    }
    Ok(BlueSolution { b_hat: raw / norm, raw, ssr })
}

/// Inverse-variance mean of the per-axis magnitudes.
///
/// Axes with zero variance are treated as exact; if there are any, their
/// plain mean is returned.
pub fn fuse_magnitudes(b: &[f64], var: &[f64]) -> f64 {
    let exact: Vec<f64> = b.iter().zip(var).filter(|(_, v)| **v <= 0.0).map(|(b, _)| *b).collect();
    if !exact.is_empty() {
        return exact.iter().sum::<f64>() / exact.len() as f64;
    }
    let (num, den) = b
        .iter()
        .zip(var)
        .fold((0.0, 0.0), |(n, d), (b, v)| (n + b / v, d + 1.0 / v));
    num / den
}

/// Four-cone reconstruction with default options.
pub fn reconstruct(cones: &ConeSet) -> Result<FieldVector> {
    reconstruct_with(cones, &ReconstructOptions::default())
}

/// Best sign tuple by residual; ties within 1e-12 go to the earlier tuple of
/// [`SignTuple::all`].
///
/// With three cones the system is square and every tuple fits exactly, so
/// candidates are ranked by how far `|raw|` is from 1 instead.
pub fn reconstruct_with(cones: &ConeSet, opts: &ReconstructOptions) -> Result<FieldVector> {
    if let Some(k) = opts.dropped_axis.filter(|&k| k >= 4) {
        return Err(Error::InvalidParameter(format!("dropped axis {k} out of range 0..4")));
    }
    let mut best: Option<(f64, SignTuple, BlueSolution)> = None;
    let mut last_err = None;
    for signs in SignTuple::all() {
        if let Some(k) = opts.dropped_axis {
            // the dropped sign is irrelevant; keep one representative
            if signs.0[k] < 0 {
                continue;
            }
        }
        let sol = match blue_solve(cones, signs, opts) {
            Ok(s) => s,
            Err(Error::DegenerateSolution) => {
                last_err = Some(Error::DegenerateSolution);
                continue;
            }
            Err(e) => return Err(e),
        };
        let score = match opts.dropped_axis {
            Some(_) => (sol.raw.norm_squared() - 1.0).powi(2),
            None => sol.ssr,
        };
        if best.as_ref().is_none_or(|(s, _, _)| score < s - SSR_TIE_TOL) {
            best = Some((score, signs, sol));
        }
    }
    let (_, signs, sol) = best.ok_or(last_err.unwrap_or(Error::DegenerateSolution))?;

    let idx: Vec<usize> = (0..4).filter(|i| opts.dropped_axis != Some(*i)).collect();
    let b: Vec<f64> = idx.iter().map(|&i| cones.b_mt[i]).collect();
    let v: Vec<f64> = idx.iter().map(|&i| cones.var_b[i]).collect();
    Ok(FieldVector { b_mt: fuse_magnitudes(&b, &v), b_hat: sol.b_hat, ssr: sol.ssr, signs })
}

/// How the eight measured lines are grouped into four resonance pairs.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PairingStrategy {
    /// k-th lowest line with k-th highest line.
    #[default]
    Nested,
    /// The matching whose four pairs give the most consistent field
    /// magnitude; handles crossing splittings at larger off-axis fields.
    ConsistentMagnitude,
}

impl std::str::FromStr for PairingStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "nested" => Ok(PairingStrategy::Nested),
            "consistent" | "consistent-magnitude" | "consistent_magnitude" => Ok(PairingStrategy::ConsistentMagnitude),
            other => Err(Error::InvalidParameter(format!("unknown pairing strategy '{other}'"))),
        }
    }
}

fn sorted_lines(lines: &[SpectralLine]) -> Result<Vec<SpectralLine>> {
    if lines.len() != 8 {
        return Err(Error::WrongLineCount { expected: 8, got: lines.len() });
    }
    if lines.iter().any(|l| !l.freq_mhz.is_finite() || !(l.sigma_mhz >= 0.0)) {
        return Err(Error::InvalidParameter("line frequencies must be finite with sigma >= 0".into()));
    }
    let mut s = lines.to_vec();
    s.sort_by(|a, b| a.freq_mhz.total_cmp(&b.freq_mhz));
    for w in s.windows(2) {
        if w[1].freq_mhz - w[0].freq_mhz <= DUPLICATE_LINE_TOL_MHZ {
            return Err(Error::DuplicateLines { first: w[0].freq_mhz, second: w[1].freq_mhz });
        }
    }
    Ok(s)
}

fn make_pair(a: &SpectralLine, b: &SpectralLine) -> Result<ResonancePair> {
    ResonancePair::new(a.freq_mhz, b.freq_mhz, a.sigma_mhz, b.sigma_mhz)
}

/// Groups eight lines into four pairs, ordered by `f_l`.
pub fn pair_resonances(lines: &[SpectralLine]) -> Result<[ResonancePair; 4]> {
    let s = sorted_lines(lines)?;
    let mut out = [ResonancePair::exact(0.0, 0.0); 4];
    for (k, slot) in out.iter_mut().enumerate() {
        *slot = make_pair(&s[k], &s[7 - k])?;
    }
    Ok(out)
}

/// Like [`pair_resonances`] with a selectable strategy; the consistent
/// strategy needs the NV parameters to evaluate each candidate matching.
pub fn pair_resonances_with(
    lines: &[SpectralLine],
    strategy: PairingStrategy,
    params: &NvParams,
) -> Result<[ResonancePair; 4]> {
    match strategy {
        PairingStrategy::Nested => pair_resonances(lines),
        PairingStrategy::ConsistentMagnitude => {
            let s = sorted_lines(lines)?;
            let nested = pair_resonances(lines)?;
            let mut best = (magnitude_spread(params, &nested), nested);
            for m in matchings(&[0, 1, 2, 3, 4, 5, 6, 7]) {
                let mut pairs = [ResonancePair::exact(0.0, 0.0); 4];
                for (slot, (i, j)) in pairs.iter_mut().zip(m) {
                    *slot = make_pair(&s[i], &s[j])?;
                }
                pairs.sort_by(|a, b| a.f_l_mhz.total_cmp(&b.f_l_mhz));
                let spread = magnitude_spread(params, &pairs);
                if spread < best.0 * (1.0 - 1e-12) - 1e-18 {
                    best = (spread, pairs);
                }
            }
            if !best.0.is_finite() {
                return Err(Error::InconsistentResonances { eff_sq_mhz2: f64::NAN });
            }
            Ok(best.1)
        }
    }
}

/// Variance of 𝓑² over the four pairs; infinite if any pair is unphysical.
fn magnitude_spread(params: &NvParams, pairs: &[ResonancePair; 4]) -> f64 {
    let mut vals = [0.0; 4];
    for (v, p) in vals.iter_mut().zip(pairs) {
        match measure_axis(params, p) {
            Ok(m) => *v = m.eff_sq_mhz2,
            Err(_) => return f64::INFINITY,
        }
    }
    let mean = vals.iter().sum::<f64>() / 4.0;
    vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 4.0
}

/// All perfect matchings of `items` (sorted ascending), each pair `(low, high)`.
fn matchings(items: &[usize]) -> Vec<Vec<(usize, usize)>> {
    if items.is_empty() {
        return vec![Vec::new()];
    }
    let first = items[0];
    let mut out = Vec::new();
    for k in 1..items.len() {
        let rest: Vec<usize> = items[1..].iter().copied().filter(|&x| x != items[k]).collect();
        for mut m in matchings(&rest) {
            m.insert(0, (first, items[k]));
            out.push(m);
        }
    }
    out
}
