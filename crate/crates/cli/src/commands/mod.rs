//! Subcommand implementations. Each returns a JSON document, optionally with
//! a table; `main` decides how to print it.

pub mod bench;
pub mod fit;
pub mod reconstruct;

use std::f64::consts::PI;

use nalgebra::{Rotation3, Unit, Vector3};
use nvmag::budget::uncertainty_budget_with_tensor;
use nvmag::calibration::{best_image_for_angle, calibration_rotation};
use nvmag::forward::{axis_polar, nv_axis};
use nvmag::inverse::{aligned_field_approx, measure_axis};
use nvmag::model::GTensor;
use nvmag::reconstruct::angle_between;
use nvmag::symmetry::{symmetry_images, SymmetryGroup};
use nvmag::{resonances_all_axes, FieldVector, ResonancePair};
use rayon::prelude::*;
use serde_json::{json, Map, Value};

use crate::args::{BudgetArgs, CalibrateArgs, FieldArgs, ForwardArgs, InverseArgs, SweepKind, SymmetryArgs};
use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::output::{Cell, Table};

pub struct Ctx {
    pub cfg: RunConfig,
    pub seed: u64,
}

pub enum Output {
    Doc(Map<String, Value>),
    /// Text mode prints only the table as CSV; JSON nests it under `table`.
    Table(Map<String, Value>, Table),
}

pub fn vec_json(v: &Vector3<f64>) -> Value {
    json!([v.x, v.y, v.z])
}

pub fn field_json(f: &FieldVector) -> Value {
    json!({
        "b_mt": f.b_mt,
        "b_hat": vec_json(&f.b_hat),
        "components_mt": vec_json(&f.components()),
    })
}

fn pair_json(axis: usize, p: &ResonancePair) -> Value {
    json!({
        "axis": axis + 1,
        "f_l_mhz": p.f_l_mhz,
        "f_u_mhz": p.f_u_mhz,
        "sigma_l_mhz": p.sigma_l_mhz,
        "sigma_u_mhz": p.sigma_u_mhz,
    })
}

impl FieldArgs {
    /// Lattice-frame field vector in mT.
    pub fn resolve(&self) -> CliResult<Vector3<f64>> {
        let by_components = self.bx.is_some() || self.by.is_some() || self.bz.is_some();
        let by_magnitude = self.b.is_some() || self.theta.is_some() || self.phi.is_some() || self.direction.is_some();
        if by_components && by_magnitude {
            return Err(CliError::usage("give either --bx/--by/--bz or --b with --theta/--phi or --direction"));
        }
        if by_components {
            let v = Vector3::new(self.bx.unwrap_or(0.0), self.by.unwrap_or(0.0), self.bz.unwrap_or(0.0));
            if !v.iter().all(|c| c.is_finite()) {
                return Err(CliError::usage("field components must be finite"));
            }
            return Ok(v);
        }
        let Some(b) = self.b else {
            return Err(CliError::usage("no field given: use --bx/--by/--bz or --b with --theta/--phi or --direction"));
        };
        if !(b >= 0.0 && b.is_finite()) {
            return Err(CliError::usage(format!("--b must be finite and >= 0, got {b}")));
        }
        let dir = match (self.direction, self.theta, self.phi) {
            (Some(_), Some(_), _) | (Some(_), _, Some(_)) => {
                return Err(CliError::usage("--direction excludes --theta/--phi"));
            }
            (Some(d), None, None) => {
                let d = Vector3::from(d);
                if d.norm() == 0.0 {
                    return Err(CliError::usage("--direction must be non-zero"));
                }
                d.normalize()
            }
            (None, Some(theta), phi) => {
                let (t, p) = (theta.to_radians(), phi.unwrap_or(0.0).to_radians());
                Vector3::new(t.sin() * p.cos(), t.sin() * p.sin(), t.cos())
            }
            (None, None, _) => return Err(CliError::usage("--b needs --theta (and optionally --phi) or --direction")),
        };
        Ok(dir * b)
    }
}

fn forward_axes(ctx: &Ctx, b: &Vector3<f64>) -> CliResult<Vec<Value>> {
    let p = &ctx.cfg.params;
    let field = FieldVector::from_components(*b);
    let pairs = resonances_all_axes(p, &field)?;
    let mut out = Vec::with_capacity(4);
    for (i, pair) in pairs.iter().enumerate() {
        let polar = axis_polar(p, &field, i)?;
        let mut v = pair_json(i, pair);
        let m = v.as_object_mut().expect("pair_json returns an object");
        m.remove("sigma_l_mhz");
        m.remove("sigma_u_mhz");
        m.insert("b_parallel_mt".into(), json!(nv_axis(i).dot(b)));
        // the angle to the axis is undefined at zero field
        let theta = if field.b_mt > 0.0 { json!(polar.theta_rad) } else { Value::Null };
        m.insert("theta_rad".into(), theta);
        out.push(v);
    }
    Ok(out)
}

pub fn forward(ctx: &Ctx, args: &ForwardArgs) -> CliResult<Output> {
    let b = args.field.resolve()?;
    match args.sweep {
        None => {
            if args.from.is_some() || args.to.is_some() || args.rotation_axis.is_some() {
                return Err(CliError::usage("--from/--to/--rotation-axis need --sweep"));
            }
            let mut m = Map::new();
            m.insert("field".into(), field_json(&FieldVector::from_components(b)));
            m.insert("pairs".into(), Value::Array(forward_axes(ctx, &b)?));
            Ok(Output::Doc(m))
        }
        Some(kind) => sweep(ctx, args, kind, b).map(|(m, t)| Output::Table(m, t)),
    }
}

fn grid(from: f64, to: f64, steps: usize) -> CliResult<Vec<f64>> {
    if steps < 2 || !from.is_finite() || !to.is_finite() {
        return Err(CliError::usage("a sweep needs finite --from/--to and --steps >= 2"));
    }
    Ok((0..steps).map(|k| from + (to - from) * k as f64 / (steps - 1) as f64).collect())
}

fn sweep(ctx: &Ctx, args: &ForwardArgs, kind: SweepKind, b: Vector3<f64>) -> CliResult<(Map<String, Value>, Table)> {
    if b.norm() == 0.0 {
        return Err(CliError::usage("a sweep needs a non-zero field to fix its direction"));
    }
    let dir = b.normalize();
    let mut meta = Map::new();
    let (label, fields): (&str, Vec<(f64, Vector3<f64>)>) = match kind {
        SweepKind::Magnitude => {
            if args.rotation_axis.is_some() {
                return Err(CliError::usage("--rotation-axis only applies to angle sweeps"));
            }
            let g = grid(args.from.unwrap_or(0.0), args.to.unwrap_or(b.norm()), args.steps)?;
            if g.iter().any(|x| *x < 0.0) {
                return Err(CliError::usage("magnitude sweep must stay >= 0"));
            }
            meta.insert("direction".into(), vec_json(&dir));
            ("b_mt", g.into_iter().map(|x| (x, dir * x)).collect())
        }
        SweepKind::Angle => {
            let axis = match args.rotation_axis {
                Some(a) => Vector3::from(a),
                // any perpendicular works; prefer one in the xy-plane
                None => {
                    let c = dir.cross(&Vector3::z());
                    if c.norm() > 1e-9 { c } else { Vector3::x() }
                }
            };
            let axis = Unit::try_new(axis, 1e-12).ok_or_else(|| CliError::usage("--rotation-axis must be non-zero"))?;
            meta.insert("rotation_axis".into(), vec_json(&axis));
            let g = grid(args.from.unwrap_or(0.0), args.to.unwrap_or(360.0), args.steps)?;
            ("angle_deg", g.into_iter().map(|a| (a, Rotation3::from_axis_angle(&axis, a.to_radians()) * b)).collect())
        }
    };

    let mut cols = vec![label.to_string(), "bx_mt".into(), "by_mt".into(), "bz_mt".into()];
    for i in 1..=4 {
        cols.push(format!("f_l_axis{i}_mhz"));
        cols.push(format!("f_u_axis{i}_mhz"));
    }
    let params = ctx.cfg.params;
    let rows: Result<Vec<Vec<Cell>>, nvmag::Error> = fields
        .par_iter()
        .map(|(x, v)| {
            let pairs = resonances_all_axes(&params, &FieldVector::from_components(*v))?;
            let mut row = vec![Cell::Num(*x), Cell::Num(v.x), Cell::Num(v.y), Cell::Num(v.z)];
            for p in pairs {
                row.push(Cell::Num(p.f_l_mhz));
                row.push(Cell::Num(p.f_u_mhz));
            }
            Ok(row)
        })
        .collect();
    meta.insert("sweep".into(), json!(label));
    Ok((meta, Table { columns: cols, rows: rows? }))
}

pub fn inverse(ctx: &Ctx, args: &InverseArgs) -> CliResult<Output> {
    let p = &ctx.cfg.params;
    let pair = ResonancePair::new(args.f_l, args.f_u, args.sigma_mhz, args.sigma_mhz)?;
    let m = measure_axis(p, &pair)?;
    let mut out = Map::new();
    out.insert("pair".into(), pair_json(0, &pair));
    out["pair"].as_object_mut().expect("object").remove("axis");
    out.insert("eff_sq_mhz2".into(), json!(m.eff_sq_mhz2));
    out.insert("sigma_eff_sq_mhz2".into(), json!(m.var_eff_sq.sqrt()));
    out.insert("b_mt".into(), json!(m.b_mt(p)));
    out.insert("sigma_b_mt".into(), json!(m.var_b_mt(p).sqrt()));
    out.insert("cos_sq_theta".into(), json!(m.cos_sq_theta));
    out.insert("sigma_cos_sq_theta".into(), json!(m.var_cos_sq.sqrt()));
    out.insert("theta_rad".into(), json!(m.theta_rad()));
    out.insert("theta_deg".into(), json!(m.theta_rad().to_degrees()));
    out.insert("aligned_approx_b_mt".into(), json!(aligned_field_approx(p, &pair)?));
    Ok(Output::Doc(out))
}

pub fn budget(ctx: &Ctx, args: &BudgetArgs) -> CliResult<Output> {
    let mut p = ctx.cfg.params;
    if let Some(s) = args.g_factor_sigma {
        p = p.with_g_factor_sigma(s)?;
    }
    let tensor = match (args.g_perp, args.g_par) {
        (Some(perp), Some(par)) => GTensor::new(perp, par)?,
        _ => GTensor::TABULATED_ANISOTROPIC,
    };
    let b = uncertainty_budget_with_tensor(&p, args.b, args.theta.to_radians(), args.fit_sigma_mhz, &tensor)?;
    let entry = |rel: f64| json!({ "relative": rel, "absolute_ut": rel * args.b * 1e3 });
    let mut out = Map::new();
    out.insert("b_mt".into(), json!(args.b));
    out.insert("theta_deg".into(), json!(args.theta));
    out.insert("fit_sigma_mhz".into(), json!(args.fit_sigma_mhz));
    out.insert("g_tensor".into(), json!({ "g_perp": tensor.g_perp, "g_par": tensor.g_par }));
    out.insert(
        "entries".into(),
        json!({
            "gamma_uncertainty": entry(b.gamma_uncertainty),
            "g_anisotropy": entry(b.g_anisotropy),
            "theta_zero_approx": entry(b.theta_zero_approx),
            "d_fit": entry(b.d_fit),
            "e_fit": entry(b.e_fit),
            "f_fit": entry(b.f_fit),
        }),
    );
    Ok(Output::Doc(out))
}

pub fn symmetry(_ctx: &Ctx, args: &SymmetryArgs) -> CliResult<Output> {
    let v = FieldVector::from_components(args.field.resolve()?);
    let group = SymmetryGroup::new();
    let images = symmetry_images(&v);
    let mut out = Map::new();
    out.insert("group_order".into(), json!(group.len()));
    out.insert("field".into(), field_json(&v));
    out.insert("orbit_size".into(), json!(images.len()));
    out.insert("images_mt".into(), Value::Array(images.iter().map(|f| vec_json(&f.components())).collect()));
    Ok(Output::Doc(out))
}

pub fn calibrate(_ctx: &Ctx, args: &CalibrateArgs) -> CliResult<Output> {
    let m1 = Vector3::from(args.measured1);
    let mut m2 = Vector3::from(args.measured2);
    let (t1, t2) = (Vector3::from(args.target1), Vector3::from(args.target2));
    let mut out = Map::new();
    if args.resolve_symmetry {
        let target_angle = angle_between(&t1, &t2);
        let (image, angle, index) = best_image_for_angle(&m1, &m2, target_angle);
        m2 = image;
        out.insert("symmetry_index".into(), json!(index));
        out.insert("chosen_measured2".into(), vec_json(&m2));
        out.insert("chosen_angle_deg".into(), json!(angle.to_degrees()));
    }
    let c = calibration_rotation([m1, m2], [t1, t2])?;
    let r = c.rotation;
    out.insert("rotation".into(), json!((0..3).map(|i| [r[(i, 0)], r[(i, 1)], r[(i, 2)]]).collect::<Vec<_>>()));
    out.insert("measured_angle_deg".into(), json!(c.measured_angle_rad.to_degrees()));
    out.insert("target_angle_deg".into(), json!(c.target_angle_rad.to_degrees()));
    out.insert("residual_deg".into(), json!(c.residual_rad.map(|x| x * 180.0 / PI)));
    Ok(Output::Doc(out))
}
