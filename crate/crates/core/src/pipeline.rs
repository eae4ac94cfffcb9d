//! The analytical chain from measured resonance lines to a field vector.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::forward::ResonancePair;
use crate::inverse::{collapse_hyperfine, measure_axis, AxisMeasurement, HyperfineMode, SpectralLine};
use crate::model::NvParams;
use crate::reconstruct::{pair_resonances_with, reconstruct_with, ConeSet, FieldVector, PairingStrategy, ReconstructOptions};

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PipelineOptions {
    pub hyperfine: HyperfineMode,
    pub pairing: PairingStrategy,
    /// Weighted reconstruction; falls back to unweighted when some axis has
    /// no uncertainty.
    pub weighted: bool,
    pub dropped_axis: Option<usize>,
}

/// Per-axis intermediate results.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct AxisDetail {
    pub pair: ResonancePair,
    pub measurement: AxisMeasurement,
    pub b_mt: f64,
    pub sigma_b_mt: f64,
    pub theta_rad: f64,
    pub cos_theta: f64,
    pub sigma_cos_theta: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PipelineResult {
    pub field: FieldVector,
    pub axes: Vec<AxisDetail>,
    pub weighted: bool,
}

/// Full chain from raw lines: hyperfine reduction, pairing, per-axis
/// inversion and reconstruction.
pub fn field_from_lines(params: &NvParams, lines: &[SpectralLine], opts: &PipelineOptions) -> Result<PipelineResult> {
    let expected = 8 * opts.hyperfine.line_count();
    if lines.len() != expected {
        return Err(Error::WrongLineCount { expected, got: lines.len() });
    }
    let reduced = if opts.hyperfine == HyperfineMode::None {
        lines.to_vec()
    } else {
        collapse_hyperfine(lines, opts.hyperfine)?
    };
    let pairs = pair_resonances_with(&reduced, opts.pairing, params)?;
    field_from_pairs(params, &pairs, opts)
}

/// Chain from already paired resonances.
pub fn field_from_pairs(params: &NvParams, pairs: &[ResonancePair; 4], opts: &PipelineOptions) -> Result<PipelineResult> {
    let mut measurements = [AxisMeasurement { eff_sq_mhz2: 0.0, cos_sq_theta: 0.0, var_eff_sq: 0.0, var_cos_sq: 0.0 }; 4];
    let mut zero = 0;
    for (m, pair) in measurements.iter_mut().zip(pairs) {
        match measure_axis(params, pair) {
            Ok(a) => *m = a,
            Err(Error::ZeroField) => zero += 1,
            Err(e) => return Err(e),
        }
    }
    if zero == 4 {
        let axes = pairs.iter().zip(&measurements).map(|(p, m)| detail(params, p, m)).collect();
        return Ok(PipelineResult { field: FieldVector::from_components(Default::default()), axes, weighted: false });
    }
    if zero > 0 {
        return Err(Error::ZeroField);
    }

    let cones = ConeSet::from_measurements(params, &measurements)?;
    let weighted = opts.weighted && cones.var_cos.iter().enumerate().all(|(i, v)| *v > 0.0 || opts.dropped_axis == Some(i));
    let field = reconstruct_with(&cones, &ReconstructOptions { weighted, dropped_axis: opts.dropped_axis })?;
    let axes = pairs.iter().zip(&measurements).map(|(p, m)| detail(params, p, m)).collect();
    Ok(PipelineResult { field, axes, weighted })
}

fn detail(params: &NvParams, pair: &ResonancePair, m: &AxisMeasurement) -> AxisDetail {
    AxisDetail {
        pair: *pair,
        measurement: *m,
        b_mt: m.b_mt(params),
        sigma_b_mt: m.var_b_mt(params).sqrt(),
        theta_rad: m.theta_rad(),
        cos_theta: m.cos_theta(),
        sigma_cos_theta: m.var_cos_theta().sqrt(),
    }
}
