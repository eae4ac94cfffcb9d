use std::path::{Path, PathBuf};

use nvmag::lineshape::{fit_line_with, sensitivity, FitOptions, LineFit, SensitivityReport, Spectrum};
use rayon::prelude::*;
use serde_json::{json, Map, Value};

use super::{Ctx, Output};
use crate::args::FitArgs;
use crate::error::{read_file, CliError, CliResult};
use crate::output::{Cell, Table};

/// Metadata keys consulted, in order, for the microwave power of a spectrum.
const POWER_KEYS: [&str; 4] = ["mw_power_dbm", "power_dbm", "mw_power", "power"];

struct LineResult {
    window_mhz: [f64; 2],
    depth: f64,
    fit: LineFit,
    sensitivity: SensitivityReport,
}

pub fn fit(ctx: &Ctx, args: &FitArgs) -> CliResult<Output> {
    let photon_rate = args.photon_rate.unwrap_or(ctx.cfg.photon_rate);
    if !(photon_rate > 0.0 && photon_rate.is_finite()) {
        return Err(CliError::usage("--photon-rate must be positive"));
    }
    let mut opts = FitOptions::new(args.model.into());
    opts.linear_baseline = args.linear_baseline;
    let gamma = ctx.cfg.params.gamma_mhz_per_mt;

    if args.path.is_dir() {
        return directory(&args.path, &opts, gamma, photon_rate);
    }
    let spec = load(&args.path)?;
    let lines = fit_windows(&spec, &opts, gamma, photon_rate)?;
    let mut out = Map::new();
    out.insert("file".into(), json!(args.path.display().to_string()));
    out.insert("model".into(), json!(opts.model.name()));
    out.insert("lines".into(), Value::Array(lines.iter().map(line_json).collect()));
    Ok(Output::Doc(out))
}

fn load(path: &Path) -> CliResult<Spectrum> {
    let text = read_file(path)?;
    Ok(Spectrum::from_csv_reader(text.as_bytes())?)
}

/// Fits every detected dip; results keep frequency order.
fn fit_windows(spec: &Spectrum, opts: &FitOptions, gamma: f64, photon_rate: f64) -> CliResult<Vec<LineResult>> {
    let windows = spec.detect_dips();
    if windows.is_empty() {
        return Err(nvmag::Error::NoDipFound.into());
    }
    let results: Result<Vec<LineResult>, nvmag::Error> = windows
        .par_iter()
        .map(|w| {
            let part = spec.slice(w.clone())?;
            let fit = fit_line_with(&part, opts)?;
            let sensitivity = sensitivity(&fit, gamma, photon_rate)?;
            let depth = 1.0 - part.signal.iter().copied().fold(f64::INFINITY, f64::min);
            Ok(LineResult { window_mhz: [part.freqs_mhz[0], part.freqs_mhz[part.len() - 1]], depth, fit, sensitivity })
        })
        .collect();
    Ok(results?)
}

fn line_json(r: &LineResult) -> Value {
    let mut fit = serde_json::to_value(&r.fit).expect("LineFit serializes");
    fit.as_object_mut().expect("struct serializes to an object").insert("std_errors".into(), json!(r.fit.std_errors()));
    json!({ "window_mhz": r.window_mhz, "fit": fit, "sensitivity": r.sensitivity })
}

/// One row per spectrum file, from its deepest dip, ordered by power.
fn directory(dir: &Path, opts: &FitOptions, gamma: f64, photon_rate: f64) -> CliResult<Output> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|source| CliError::Io { path: dir.display().to_string(), source })?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.extension().is_some_and(|x| x.eq_ignore_ascii_case("csv")))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(CliError::usage(format!("{}: no .csv spectra", dir.display())));
    }

    let rows: Vec<CliResult<(Option<f64>, String, LineResult)>> = files
        .par_iter()
        .map(|path| {
            let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
            let spec = load(path)?;
            let power = POWER_KEYS
                .iter()
                .find_map(|k| spec.metadata.get(*k).and_then(|v| leading_number(v)))
                .or_else(|| path.file_stem().and_then(|s| last_number(&s.to_string_lossy())));
            let mut lines = fit_windows(&spec, opts, gamma, photon_rate)?;
            let deepest = (0..lines.len()).max_by(|&a, &b| lines[a].depth.total_cmp(&lines[b].depth)).expect("at least one line");
            Ok((power, name, lines.swap_remove(deepest)))
        })
        .collect();
    let mut ok = Vec::with_capacity(rows.len());
    for (r, path) in rows.into_iter().zip(&files) {
        match r {
            Ok(v) => ok.push(v),
            Err(e) => {
                eprintln!("{}: {e}", path.display());
                return Err(e);
            }
        }
    }
    ok.sort_by(|a, b| match (a.0, b.0) {
        (Some(x), Some(y)) => x.total_cmp(&y).then_with(|| a.1.cmp(&b.1)),
        (Some(_), None) => std::cmp::Ordering::Less,
        (None, Some(_)) => std::cmp::Ordering::Greater,
        (None, None) => a.1.cmp(&b.1),
    });

    let mut table = Table::new(&[
        "file",
        "power",
        "f_res_mhz",
        "contrast",
        "alpha_v_mhz",
        "alpha_l_mhz",
        "alpha_g_mhz",
        "d",
        "r_squared",
        "eta_t_per_sqrt_hz",
    ]);
    for (power, name, r) in ok {
        let f = &r.fit;
        table.rows.push(vec![
            Cell::Text(name),
            power.map_or(Cell::Empty, Cell::Num),
            Cell::Num(f.f_res_mhz),
            Cell::Num(f.contrast),
            Cell::Num(f.alpha_v_mhz),
            Cell::Num(f.alpha_l_mhz),
            Cell::Num(f.alpha_g_mhz),
            Cell::Num(f.d),
            Cell::Num(f.r_squared),
            Cell::Num(r.sensitivity.eta_t_per_sqrt_hz),
        ]);
    }
    let mut meta = Map::new();
    meta.insert("directory".into(), json!(dir.display().to_string()));
    meta.insert("model".into(), json!(opts.model.name()));
    Ok(Output::Table(meta, table))
}

/// Number at the start of a metadata value such as `"12.5 dBm"`.
fn leading_number(s: &str) -> Option<f64> {
    let s = s.trim();
    let end = s.find(|c: char| !(c.is_ascii_digit() || matches!(c, '.' | '-' | '+' | 'e' | 'E'))).unwrap_or(s.len());
    (0..=end).rev().find_map(|k| s[..k].parse().ok())
}

/// Last number in a file stem: `odmr_p-10dBm` gives -10, `run3_2.5mW` 2.5.
/// A `-` counts as a sign unless a digit precedes it.
fn last_number(stem: &str) -> Option<f64> {
    let b = stem.as_bytes();
    let mut end = b.len();
    while end > 0 && !b[end - 1].is_ascii_digit() {
        end -= 1;
    }
    if end == 0 {
        return None;
    }
    let mut start = end;
    while start > 0 && (b[start - 1].is_ascii_digit() || b[start - 1] == b'.') {
        start -= 1;
    }
    if start > 0 && b[start - 1] == b'-' && (start < 2 || !b[start - 2].is_ascii_digit()) {
        start -= 1;
    }
    stem[start..end].trim_start_matches('.').parse().ok()
}
