//! Timing comparison of the analytical chain and the numerical baseline.
//!
//! Both paths start from the same eight resonance lines of a random field.
//! The analytical path pairs, inverts and reconstructs. The numerical path
//! pairs and then runs gradient descent from a guess perturbed by 5 % of the
//! field magnitude. Only computation is timed; the first `warmup`
//! calls of each path are discarded.

use std::hint::black_box;
use std::time::Instant;

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::baseline::{numerical_baseline, BaselineResult};
use crate::error::{Error, Result};
use crate::forward::{resonances_all_axes, ResonancePair};
use crate::inverse::SpectralLine;
use crate::model::NvParams;
use crate::pipeline::{field_from_lines, PipelineOptions};
use crate::reconstruct::{pair_resonances, FieldVector};
use crate::symmetry::{orbit_distance, SymmetryGroup};

/// Fields with two lines closer than this are redrawn: such lines are not
/// resolvable in a measured spectrum, and the sorted residual of the
/// numerical baseline has a kink within one gradient step of the solution.
pub const MIN_LINE_SEPARATION_MHZ: f64 = 0.1;

/// Baseline solutions with a larger residual (MHz²) sit in a spurious local
/// minimum of the sorted residual and are not compared.
pub const LOCAL_MINIMUM_SSR_MHZ2: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BenchConfig {
    /// Number of random field points.
    pub points: usize,
    /// Timed repetitions per point.
    pub runs_per_point: usize,
    pub seed: u64,
    pub warmup: usize,
    pub b_min_mt: f64,
    pub b_max_mt: f64,
    /// Relative size of the guess perturbation for the numerical path.
    pub guess_perturbation: f64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            points: 600,
            runs_per_point: 500,
            seed: 1,
            warmup: 50,
            b_min_mt: 1.0,
            b_max_mt: 20.0,
            guess_perturbation: 0.05,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TimingSummary {
    pub mean_us: f64,
    pub median_us: f64,
    pub p95_us: f64,
}

impl TimingSummary {
    pub fn from_samples(samples: &[f64]) -> Self {
        let mut s = samples.to_vec();
        s.sort_by(f64::total_cmp);
        let quantile = |q: f64| {
            let pos = q * (s.len() - 1) as f64;
            let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
            s[lo] + (s[hi] - s[lo]) * (pos - lo as f64)
        };
        Self {
            mean_us: s.iter().sum::<f64>() / s.len() as f64,
            median_us: quantile(0.5),
            p95_us: quantile(0.95),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BenchResult {
    pub config: BenchConfig,
    /// Mean time per point (µs), one entry per field point.
    pub analytical_us: Vec<f64>,
    pub numerical_us: Vec<f64>,
    /// Summaries over every timed run.
    pub analytical: TimingSummary,
    pub numerical: TimingSummary,
    pub samples: usize,
    /// Largest angle between the two solutions after symmetry alignment.
    pub max_angle_rad: f64,
    /// Largest component difference between the two solutions (mT) after
    /// symmetry alignment.
    pub max_component_diff_mt: f64,
    /// Random fields redrawn because their lines were unresolved or could
    /// not be paired unambiguously.
    pub redrawn: usize,
    /// Points where the numerical baseline did not converge; they are timed
    /// but left out of the agreement check.
    pub baseline_failures: usize,
    /// Points where the baseline converged to a spurious local minimum; also
    /// left out of the agreement check.
    pub baseline_local_minima: usize,
}

impl BenchResult {
    pub fn speedup(&self) -> f64 {
        self.numerical.median_us / self.analytical.median_us
    }
}

/// One benchmark input: a field and its eight resonance lines.
#[derive(Clone, Debug, PartialEq)]
pub struct BenchSample {
    pub truth: Vector3<f64>,
    pub lines: Vec<SpectralLine>,
    pub guess: Vector3<f64>,
}

/// Deterministic random inputs for a given seed.
///
/// Fields whose lines are closer than [`MIN_LINE_SEPARATION_MHZ`] or are not
/// correctly grouped by nested pairing are redrawn, so every sample has
/// resolvable, identifiable pairs. Returns the samples and the redraw count.
pub fn bench_samples(params: &NvParams, cfg: &BenchConfig) -> Result<(Vec<BenchSample>, usize)> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut out = Vec::with_capacity(cfg.points);
    let mut redrawn = 0;
    while out.len() < cfg.points {
        let dir = random_unit(&mut rng);
        let b = rng.random_range(cfg.b_min_mt..=cfg.b_max_mt);
        let truth = dir * b;
        let pairs = resonances_all_axes(params, &FieldVector::from_components(truth))?;
        let lines: Vec<SpectralLine> = pairs
            .iter()
            .flat_map(|p| [SpectralLine::new(p.f_l_mhz, 0.0), SpectralLine::new(p.f_u_mhz, 0.0)])
            .collect();
        if !lines_resolved(&lines) || !nested_pairing_is_correct(&lines, &pairs) {
            redrawn += 1;
            continue;
        }
        let guess = truth + random_unit(&mut rng) * (cfg.guess_perturbation * b);
        out.push(BenchSample { truth, lines, guess });
    }
    Ok((out, redrawn))
}

fn random_unit(rng: &mut ChaCha8Rng) -> Vector3<f64> {
    loop {
        let v = Vector3::new(
            StandardNormal.sample(rng),
            StandardNormal.sample(rng),
            StandardNormal.sample(rng),
        );
        let n: f64 = v.norm();
        if n > 1e-12 {
            return v / n;
        }
    }
}

fn lines_resolved(lines: &[SpectralLine]) -> bool {
    let mut f: Vec<f64> = lines.iter().map(|l| l.freq_mhz).collect();
    f.sort_by(f64::total_cmp);
    f.windows(2).all(|w| w[1] - w[0] >= MIN_LINE_SEPARATION_MHZ)
}

fn nested_pairing_is_correct(lines: &[SpectralLine], truth: &[ResonancePair; 4]) -> bool {
    let Ok(nested) = pair_resonances(lines) else { return false };
    let mut t = *truth;
    t.sort_by(|a, b| a.f_l_mhz.total_cmp(&b.f_l_mhz));
    nested.iter().zip(&t).all(|(a, b)| a.f_l_mhz == b.f_l_mhz && a.f_u_mhz == b.f_u_mhz)
}

/// Numerical path: pairing followed by gradient descent.
pub fn numerical_chain(params: &NvParams, lines: &[SpectralLine], guess: &Vector3<f64>) -> Result<BaselineResult> {
    let pairs = pair_resonances(lines)?;
    numerical_baseline(&pairs, params, guess)
}

/// Runs the full protocol.
pub fn run_bench(params: &NvParams, cfg: &BenchConfig) -> Result<BenchResult> {
    if cfg.points == 0 || cfg.runs_per_point == 0 {
        return Err(Error::InvalidParameter("benchmark needs at least one point and one run".into()));
    }
    let (samples, redrawn) = bench_samples(params, cfg)?;
    let opts = PipelineOptions::default();

    for _ in 0..cfg.warmup {
        let s = &samples[0];
        black_box(field_from_lines(params, black_box(&s.lines), &opts)?);
        let _ = black_box(numerical_chain(params, black_box(&s.lines), &s.guess));
    }

    let group = SymmetryGroup::new();
    let mut all_a = Vec::with_capacity(cfg.points * cfg.runs_per_point);
    let mut all_n = Vec::with_capacity(cfg.points * cfg.runs_per_point);
    let mut per_a = Vec::with_capacity(cfg.points);
    let mut per_n = Vec::with_capacity(cfg.points);
    let mut max_angle: f64 = 0.0;
    let mut max_diff: f64 = 0.0;
    let mut baseline_failures = 0;
    let mut baseline_local_minima = 0;

    for s in &samples {
        let mut analytical = None;
        let mut numerical = None;
        let (mut sum_a, mut sum_n) = (0.0, 0.0);
        for _ in 0..cfg.runs_per_point {
            let t0 = Instant::now();
            let a = field_from_lines(params, black_box(&s.lines), &opts)?;
            let ta = t0.elapsed().as_secs_f64() * 1e6;
            let t1 = Instant::now();
            let n = numerical_chain(params, black_box(&s.lines), &s.guess);
            let tn = t1.elapsed().as_secs_f64() * 1e6;
            all_a.push(ta);
            all_n.push(tn);
            sum_a += ta;
            sum_n += tn;
            analytical = Some(a.field);
            numerical = Some(n);
        }
        per_a.push(sum_a / cfg.runs_per_point as f64);
        per_n.push(sum_n / cfg.runs_per_point as f64);

        let a = analytical.expect("at least one run");
        match numerical.expect("at least one run") {
            Ok(n) if n.ssr_mhz2 > LOCAL_MINIMUM_SSR_MHZ2 => baseline_local_minima += 1,
            Ok(BaselineResult { field: n, .. }) => {
                let (angle, k) = orbit_distance(&a.b_hat, &n.b_hat);
                max_angle = max_angle.max(angle);
                let aligned = group.elements()[k] * a.components();
                max_diff = max_diff.max((aligned - n.components()).amax());
            }
            Err(Error::BaselineNotConverged { .. }) => baseline_failures += 1,
            Err(e) => return Err(e),
        }
    }

    Ok(BenchResult {
        config: *cfg,
        analytical: TimingSummary::from_samples(&all_a),
        numerical: TimingSummary::from_samples(&all_n),
        analytical_us: per_a,
        numerical_us: per_n,
        samples: all_a.len(),
        max_angle_rad: max_angle,
        max_component_diff_mt: max_diff,
        redrawn,
        baseline_failures,
        baseline_local_minima,
    })
}
