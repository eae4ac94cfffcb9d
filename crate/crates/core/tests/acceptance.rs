//! Acceptance suite: runs every criterion sequentially (so the timing
//! criterion sees an idle machine) and prints one PASS/FAIL line for each.

mod common;

use std::f64::consts::{FRAC_PI_2, PI};
use std::time::Instant;

use nalgebra::Vector3;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use nvmag::bench::{run_bench, BenchConfig};
use nvmag::budget::uncertainty_budget;
use nvmag::forward::{resonances, resonances_all_axes, viete_roots};
use nvmag::inverse::{aligned_field_approx, alignment_error_map, measure_axis};
use nvmag::lineshape::faddeeva::faddeeva;
use nvmag::lineshape::fit::{fit_line, LineModel};
use nvmag::lineshape::profiles::{fwhm_voigt, voigt_contrast_model, widths_for_coordinate, sigma_from_alpha_g};
use nvmag::lineshape::sensitivity::sensitivity;
use nvmag::lineshape::spectrum::Spectrum;
use nvmag::model::{anisotropy_discrepancy, assemble_hamiltonian, cubic_coeffs, numerical_resonances, GTensor};
use nvmag::pipeline::{field_from_pairs, PipelineOptions};
use nvmag::symmetry::{orbit_distance, symmetry_images, SymmetryGroup};
use nvmag::{FieldPolar, FieldVector, NvParams, ResonancePair};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn random_unit(rng: &mut ChaCha8Rng) -> Vector3<f64> {
    loop {
        let v = Vector3::new(StandardNormal.sample(rng), StandardNormal.sample(rng), StandardNormal.sample(rng));
        let n: f64 = v.norm();
        if n > 1e-9 {
            return v / n;
        }
    }
}

fn round_trip() -> Outcome {
    let start = Instant::now();
    let (mut worst_b, mut worst_c) = (0.0f64, 0.0f64);
    let mut failures = 0;
    for e in [0.0, 5.0, 20.0] {
        let p = NvParams::new(2870.0, e, 28.032).unwrap();
        for i in 0..50 {
            // log-spaced magnitudes cover all four decades evenly
            let b = 0.1 * 1000f64.powf(i as f64 / 49.0);
            for j in 0..50 {
                let theta = FRAC_PI_2 * j as f64 / 49.0;
                let pair = resonances(&p, &FieldPolar::new(&p, b, theta).unwrap()).unwrap();
                match measure_axis(&p, &pair) {
                    Ok(m) => {
                        let eff = b * 28.032;
                        worst_b = worst_b.max((m.eff_sq_mhz2.sqrt() - eff).abs() / eff);
                        worst_c = worst_c.max((m.cos_sq_theta - theta.cos().powi(2)).abs());
                    }
                    Err(_) => failures += 1,
                }
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        failures == 0 && worst_b <= 1e-9 && worst_c <= 1e-9 && secs < 5.0,
        format!("max rel 𝓑 err {worst_b:.2e}, max abs cos²θ err {worst_c:.2e}, {failures} failures, {secs:.3} s"),
    )
}

fn oracle_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (mut worst_roots, mut worst_freq) = (0.0f64, 0.0f64);
    for _ in 0..10_000 {
        let d = rng.random_range(2800.0..2900.0);
        let e = rng.random_range(0.0..30.0);
        let p = NvParams::new(d, e, 28.032).unwrap();
        let field = FieldPolar::new(&p, rng.random_range(0.0..200.0), rng.random_range(0.0..FRAC_PI_2)).unwrap();
        let h = assemble_hamiltonian(&p, &field, None);

        let reference = common::reference_eigenvalues(&h);
        let shift = (reference[0] + reference[1] + reference[2]) / 3.0;
        let roots = viete_roots(cubic_coeffs(&p, &field)).unwrap();
        let scale = reference.iter().map(|v| (v - shift).abs()).fold(0.0, f64::max);
        for k in 0..3 {
            worst_roots = worst_roots.max((roots[k] - (reference[k] - shift)).abs() / scale);
        }

        let analytic = resonances(&p, &field).unwrap();
        let jacobi = numerical_resonances(&h).unwrap();
        let oracle = ResonancePair::exact(reference[1] - reference[0], reference[2] - reference[0]);
        for other in [jacobi, oracle] {
            worst_freq = worst_freq.max((analytic.f_l_mhz - other.f_l_mhz).abs() / other.f_l_mhz);
            worst_freq = worst_freq.max((analytic.f_u_mhz - other.f_u_mhz).abs() / other.f_u_mhz);
        }
    }
    outcome(
        worst_roots <= 1e-10 && worst_freq <= 1e-10,
        format!("10⁴ Hamiltonians: max rel root err {worst_roots:.2e}, max rel frequency err {worst_freq:.2e}"),
    )
}

fn aligned_approximation() -> Outcome {
    let p = NvParams::default();
    let pair = resonances(&p, &FieldPolar::new(&p, 10.0, 1f64.to_radians()).unwrap()).unwrap();
    let err_ut = (aligned_field_approx(&p, &pair).unwrap() - 10.0).abs() * 1e3;

    let thetas: Vec<f64> = (0..=200).map(|k| (0.1 * k as f64).to_radians()).collect();
    let fields = [0.5, 1.0, 5.0, 10.0, 50.0, 100.0];
    let mut monotone = true;
    for e in [0.0, 5.0] {
        let pe = NvParams::new(2870.0, e, 28.032).unwrap();
        let map = alignment_error_map(&pe, &fields, &thetas).unwrap();
        monotone &= map.iter().all(|row| row.windows(2).all(|w| w[1] >= w[0]));
    }
    outcome(
        (err_ut - 1.5).abs() <= 0.5 && monotone,
        format!("error at (10 mT, 1°) = {err_ut:.3} µT, monotone on [0°, 20°]: {monotone}"),
    )
}

fn budget_checks() -> Outcome {
    let p = NvParams::default().with_g_factor_sigma(0.0003).unwrap();
    let theta = 1f64.to_radians();
    let b = uncertainty_budget(&p, 10.0, theta, 0.01).unwrap();
    let gamma_ut = b.gamma_uncertainty * 10.0 * 1e3;
    let aniso_ut = anisotropy_discrepancy(
        &p,
        10.0,
        theta,
        &GTensor::isotropic(2.0030).unwrap(),
        &GTensor::new(2.0031, 2.0029).unwrap(),
    )
    .unwrap()
        * 1e3;
    outcome(
        (gamma_ut - 1.5).abs() <= 0.2 && (aniso_ut - 0.5).abs() <= 0.3,
        format!("γ term {gamma_ut:.3} µT, anisotropy {aniso_ut:.3} µT"),
    )
}

fn vector_reconstruction() -> Outcome {
    let p = NvParams::default();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let noise = Normal::new(0.0, 0.01).unwrap();
    let weighted = PipelineOptions { weighted: true, ..Default::default() };
    let mut worst = 0.0f64;
    let mut clean_failures = 0;
    let mut noisy_errors = Vec::with_capacity(1000);
    for _ in 0..1000 {
        let truth = FieldVector::from_components(random_unit(&mut rng) * rng.random_range(1.0..50.0));
        let pairs = resonances_all_axes(&p, &truth).unwrap();
        match field_from_pairs(&p, &pairs, &PipelineOptions::default()) {
            Ok(r) => worst = worst.max(orbit_distance(&truth.b_hat, &r.field.b_hat).0),
            Err(_) => clean_failures += 1,
        }

        let noisy = pairs.map(|q| {
            let (a, b) = (q.f_l_mhz + noise.sample(&mut rng), q.f_u_mhz + noise.sample(&mut rng));
            ResonancePair::new(a.min(b), a.max(b), 0.01, 0.01).unwrap()
        });
        // a failed solve counts as the worst possible error
        let err = field_from_pairs(&p, &noisy, &weighted).map(|r| orbit_distance(&truth.b_hat, &r.field.b_hat).0).unwrap_or(PI);
        noisy_errors.push(err);
    }
    noisy_errors.sort_by(f64::total_cmp);
    let median_deg = noisy_errors[500].to_degrees();
    outcome(
        clean_failures == 0 && worst <= 1e-6 && median_deg < 0.5,
        format!("noiseless max orbit angle {worst:.2e} rad ({clean_failures} failures); noisy median {median_deg:.4}°"),
    )
}

fn olivero_fwhm() -> Outcome {
    let mut worst = 0.0f64;
    let mut at = 0.0;
    for k in 0..=100 {
        let d = -1.0 + 0.02 * k as f64;
        let (alpha_l, alpha_g) = (1.0 + d, 1.0 - d);
        let (sigma, nu) = (sigma_from_alpha_g(alpha_g), 0.5 * alpha_l);
        let exact = common::fwhm_by_bisection(|x| common::voigt_convolution(x, sigma, nu), 0.5);
        let rel = (fwhm_voigt(alpha_l, alpha_g) - exact).abs() / exact;
        if rel > worst {
            worst = rel;
            at = d;
        }
    }
    outcome(worst < 2.5e-4, format!("max rel FWHM err {:.4} % at d = {at:.2}", worst * 100.0))
}

const R2_TIE_TOL: f64 = 1e-9;

fn voigt_superiority() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let noise = Normal::new(0.0, 0.005).unwrap();
    let (mut r2_ok, mut eta_ok, mut trials) = (0, 0, 0);
    let mut failed = 0;
    for _ in 0..100 {
        trials += 1;
        let d = rng.random_range(0.2..0.8);
        let alpha_v = rng.random_range(4.0..8.0);
        let contrast = rng.random_range(0.04..0.06);
        let f0 = 2870.0 + rng.random_range(-1.0..1.0);
        let (alpha_l, alpha_g) = widths_for_coordinate(d, alpha_v);
        let (sigma, nu) = (sigma_from_alpha_g(alpha_g), 0.5 * alpha_l);
        let freqs: Vec<f64> = (0..401).map(|i| 2870.0 - 4.0 * alpha_v + 8.0 * alpha_v * i as f64 / 400.0).collect();
        let signal = freqs.iter().map(|&f| voigt_contrast_model(f, f0, sigma, nu, contrast) + noise.sample(&mut rng)).collect();
        let spec = Spectrum::new(freqs, signal, None).unwrap();

        let fits: Result<Vec<_>, _> = [LineModel::Voigt, LineModel::Lorentzian, LineModel::Gaussian]
            .iter()
            .map(|m| fit_line(&spec, *m))
            .collect();
        let Ok(fits) = fits else {
            failed += 1;
            continue;
        };
        let (v, l, g) = (&fits[0], &fits[1], &fits[2]);
        // R² = 1 − SSR/SST on shared data; at a nested limit the two SSRs agree
        // only to the fit's stopping tolerance, so ties are compared at that level
        let at_least = |other: f64| v.ssr <= other * (1.0 + R2_TIE_TOL);
        if at_least(l.ssr) && at_least(g.ssr) {
            r2_ok += 1;
        }
        let eta = |f| sensitivity(f, 28.032, 1e12).unwrap().eta_t_per_sqrt_hz;
        if eta(l) <= eta(v) && eta(v) <= eta(g) {
            eta_ok += 1;
        }
    }
    let (r2, eta) = (r2_ok as f64 / trials as f64, eta_ok as f64 / trials as f64);
    outcome(
        r2 >= 0.95 && eta >= 0.90,
        format!("Voigt best R² in {:.0} %, η ordering in {:.0} % ({failed} fit failures); published dataset not available", r2 * 100.0, eta * 100.0),
    )
}

fn benchmark() -> Outcome {
    let start = Instant::now();
    let r = run_bench(&NvParams::default(), &BenchConfig::default()).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let agree = r.max_angle_rad < 1e-6 && r.max_component_diff_mt < 1e-6 && r.baseline_failures == 0;
    outcome(
        r.analytical.median_us <= 50.0 && r.speedup() >= 10.0 && secs < 600.0 && agree,
        format!(
            "analytical median {:.2} µs, numerical median {:.1} µs, ratio {:.0}×, {} runs in {secs:.1} s, \
             max disagreement {:.1e} rad / {:.1e} mT, baseline {} unconverged / {} local minima",
            r.analytical.median_us,
            r.numerical.median_us,
            r.speedup(),
            r.samples,
            r.max_angle_rad,
            r.max_component_diff_mt,
            r.baseline_failures,
            r.baseline_local_minima
        ),
    )
}

fn symmetry_suite() -> Outcome {
    let g = SymmetryGroup::new();
    let orthogonal = g.elements().iter().all(|m| m.transpose() * m == nalgebra::Matrix3::identity());
    let size = |v: Vector3<f64>| symmetry_images(&FieldVector::from_components(v)).len();
    let (axis, diag, generic) = (
        size(Vector3::new(0.0, 0.0, 2.0)),
        size(Vector3::new(1.0, 1.0, 1.0)),
        size(Vector3::new(0.3, -1.1, 2.7)),
    );
    outcome(
        g.len() == 48 && orthogonal && axis == 6 && diag == 8 && generic == 48,
        format!("order {}, orthogonal {orthogonal}, orbits {axis}/{diag}/{generic}", g.len()),
    )
}

fn faddeeva_kernel() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut worst = 0.0f64;
    let mut at = Complex64::new(0.0, 0.0);
    for _ in 0..1000 {
        let r = 10f64.powf(rng.random_range(-6.0..3.0));
        let phi = rng.random_range(0.0..=PI);
        let z = Complex64::from_polar(r, phi);
        let z = Complex64::new(z.re, z.im.max(0.0));
        let w = faddeeva(z).unwrap();
        let reference = common::faddeeva_oracle(z);
        let rel = (w - reference).norm() / reference.norm();
        if rel > worst {
            worst = rel;
            at = z;
        }
    }
    outcome(worst <= 1e-6, format!("max rel err {worst:.2e} at z = {at:.4e}"))
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 10] = [
        ("round-trip exactness", round_trip),
        ("Viète vs eigensolver", oracle_equivalence),
        ("aligned-field approximation", aligned_approximation),
        ("uncertainty budget", budget_checks),
        ("vector reconstruction", vector_reconstruction),
        ("Voigt FWHM approximation", olivero_fwhm),
        ("Voigt fit superiority", voigt_superiority),
        ("benchmark", benchmark),
        ("symmetry group", symmetry_suite),
        ("Faddeeva kernel", faddeeva_kernel),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let o = run();
        if !o.pass {
            failed += 1;
        }
        println!("criterion {:>2} {:<28} {}  {}", i + 1, name, if o.pass { "PASS" } else { "FAIL" }, o.detail);
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
