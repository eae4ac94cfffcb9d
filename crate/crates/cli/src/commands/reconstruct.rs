use std::io::Read;
use std::path::Path;

use nvmag::inverse::{collapse_hyperfine, SpectralLine};
use nvmag::pipeline::{field_from_lines, field_from_pairs, PipelineOptions, PipelineResult};
use nvmag::symmetry::symmetry_images;
use nvmag::{HyperfineMode, ResonancePair};
use serde::Deserialize;
use serde_json::{json, Map, Value};

use super::{field_json, vec_json, Ctx, Output};
use crate::args::ReconstructArgs;
use crate::error::{read_file, CliError, CliResult};

enum Input {
    Lines(Vec<SpectralLine>),
    Pairs(Vec<ResonancePair>),
}

pub fn reconstruct(ctx: &Ctx, args: &ReconstructArgs) -> CliResult<Output> {
    if !(args.sigma_mhz >= 0.0 && args.sigma_mhz.is_finite()) {
        return Err(CliError::usage("--sigma-mhz must be finite and >= 0"));
    }
    let input = if let Some(f) = &args.lines {
        Input::Lines(f.iter().map(|&x| SpectralLine::new(x, args.sigma_mhz)).collect())
    } else if let Some(path) = &args.lines_file {
        Input::Lines(parse_lines(&read_file(path)?, args.sigma_mhz).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?)
    } else if let Some(path) = &args.pairs_file {
        let text = read_source(path)?;
        Input::Pairs(parse_pairs(&text, args.sigma_mhz).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?)
    } else {
        return Err(CliError::usage("give --lines, --lines-file or --pairs-file"));
    };

    let cfg = &ctx.cfg;
    let missing = args.missing_axis.map(|a| a as usize - 1);
    let opts = PipelineOptions {
        hyperfine: args.hyperfine.unwrap_or(cfg.hyperfine),
        pairing: args.pairing.unwrap_or(cfg.pairing),
        weighted: args.weighted || cfg.weighted,
        dropped_axis: missing,
    };
    let result = match input {
        Input::Lines(lines) => from_lines(ctx, &lines, &opts)?,
        Input::Pairs(pairs) => {
            let expected = if missing.is_some() { 3 } else { 4 };
            if pairs.len() != expected {
                return Err(CliError::usage(format!("expected {expected} pairs, got {}", pairs.len())));
            }
            field_from_pairs(&cfg.params, &complete(&pairs, missing), &opts)?
        }
    };
    Ok(Output::Doc(render(&result, missing, args.symmetry || cfg.symmetry)))
}

fn from_lines(ctx: &Ctx, lines: &[SpectralLine], opts: &PipelineOptions) -> CliResult<PipelineResult> {
    let per = opts.hyperfine.line_count();
    let resonances = if opts.dropped_axis.is_some() { 6 } else { 8 };
    if lines.len() != resonances * per {
        let detail = if per > 1 { format!(" ({resonances} resonances with {per} hyperfine lines each)") } else { String::new() };
        return Err(CliError::usage(format!("expected {} lines{detail}, got {}", resonances * per, lines.len())));
    }
    if opts.dropped_axis.is_none() {
        return Ok(field_from_lines(&ctx.cfg.params, lines, opts)?);
    }
    // three resolved axes: nested pairing of the six reduced lines
    let mut reduced = if opts.hyperfine == HyperfineMode::None { lines.to_vec() } else { collapse_hyperfine(lines, opts.hyperfine)? };
    reduced.sort_by(|a, b| a.freq_mhz.total_cmp(&b.freq_mhz));
    let pairs: Vec<ResonancePair> = (0..3)
        .map(|k| {
            let (a, b) = (reduced[k], reduced[5 - k]);
            ResonancePair::new(a.freq_mhz, b.freq_mhz, a.sigma_mhz, b.sigma_mhz)
        })
        .collect::<Result<_, _>>()?;
    Ok(field_from_pairs(&ctx.cfg.params, &complete(&pairs, opts.dropped_axis), opts)?)
}

/// Four pairs, with a stand-in at the missing axis; the reconstruction
/// ignores that slot.
fn complete(pairs: &[ResonancePair], missing: Option<usize>) -> [ResonancePair; 4] {
    let mut v = pairs.to_vec();
    if let Some(k) = missing {
        v.insert(k, pairs[0]);
    }
    [v[0], v[1], v[2], v[3]]
}

fn render(r: &PipelineResult, missing: Option<usize>, with_images: bool) -> Map<String, Value> {
    let mut out = Map::new();
    out.insert("field".into(), field_json(&r.field));
    out.insert("cone_ssr".into(), json!(r.field.ssr));
    out.insert("signs".into(), json!(r.field.signs.0));
    out.insert("weighted".into(), json!(r.weighted));
    out.insert("missing_axis".into(), json!(missing.map(|k| k + 1)));
    let axes: Vec<Value> = r
        .axes
        .iter()
        .enumerate()
        .filter(|(i, _)| missing != Some(*i))
        .map(|(i, a)| {
            json!({
                "axis": i + 1,
                "f_l_mhz": a.pair.f_l_mhz,
                "f_u_mhz": a.pair.f_u_mhz,
                "eff_sq_mhz2": a.measurement.eff_sq_mhz2,
                "b_mt": a.b_mt,
                "sigma_b_mt": a.sigma_b_mt,
                "theta_rad": a.theta_rad,
                "theta_deg": a.theta_rad.to_degrees(),
                "cos_theta": a.cos_theta,
                "sigma_cos_theta": a.sigma_cos_theta,
            })
        })
        .collect();
    out.insert("axes".into(), Value::Array(axes));
    if with_images {
        let images = symmetry_images(&r.field);
        out.insert("images_mt".into(), Value::Array(images.iter().map(|f| vec_json(&f.components())).collect()));
    }
    out
}

fn read_source(path: &Path) -> CliResult<String> {
    if path.as_os_str() == "-" {
        let mut s = String::new();
        std::io::stdin()
            .read_to_string(&mut s)
            .map_err(|source| CliError::Io { path: "<stdin>".into(), source })?;
        Ok(s)
    } else {
        read_file(path)
    }
}

/// Numeric rows of a small comma-separated file; `#` comments, blank lines
/// and one leading header row are skipped.
fn numeric_rows(text: &str) -> Result<Vec<Vec<f64>>, String> {
    let mut rows = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let parsed: Result<Vec<f64>, _> = line.split(',').map(|c| c.trim().parse::<f64>()).collect();
        match parsed {
            Ok(v) => rows.push(v),
            Err(_) if rows.is_empty() && line.chars().any(|c| c.is_alphabetic()) => continue,
            Err(_) => return Err(format!("line {}: cannot parse '{line}'", n + 1)),
        }
    }
    Ok(rows)
}

fn parse_lines(text: &str, default_sigma: f64) -> Result<Vec<SpectralLine>, String> {
    numeric_rows(text)?
        .into_iter()
        .map(|r| match r[..] {
            [f] => Ok(SpectralLine::new(f, default_sigma)),
            [f, s] => Ok(SpectralLine::new(f, s)),
            _ => Err(format!("expected frequency_mhz[,sigma_mhz], got {} columns", r.len())),
        })
        .collect()
}

#[derive(Deserialize)]
struct PairDoc {
    pairs: Vec<PairRow>,
}

#[derive(Deserialize)]
struct PairRow {
    f_l_mhz: f64,
    f_u_mhz: f64,
    sigma_l_mhz: Option<f64>,
    sigma_u_mhz: Option<f64>,
}

fn parse_pairs(text: &str, default_sigma: f64) -> Result<Vec<ResonancePair>, String> {
    let rows: Vec<[f64; 4]> = if text.trim_start().starts_with('{') {
        let doc: PairDoc = serde_json::from_str(text).map_err(|e| e.to_string())?;
        doc.pairs
            .iter()
            .map(|p| [p.f_l_mhz, p.f_u_mhz, p.sigma_l_mhz.unwrap_or(default_sigma), p.sigma_u_mhz.unwrap_or(default_sigma)])
            .collect()
    } else {
        numeric_rows(text)?
            .into_iter()
            .map(|r| match r[..] {
                [l, u] => Ok([l, u, default_sigma, default_sigma]),
                [l, u, sl, su] => Ok([l, u, sl, su]),
                _ => Err(format!("expected f_l_mhz,f_u_mhz[,sigma_l_mhz,sigma_u_mhz], got {} columns", r.len())),
            })
            .collect::<Result<_, _>>()?
    };
    rows.iter().map(|r| ResonancePair::new(r[0], r[1], r[2], r[3]).map_err(|e| e.to_string())).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::RunConfig;
    use nalgebra::Vector3;
    use nvmag::symmetry::orbit_distance;
    use nvmag::{resonances_all_axes, FieldVector};

    fn ctx() -> Ctx {
        Ctx { cfg: RunConfig::default(), seed: 1 }
    }

    fn args() -> ReconstructArgs {
        ReconstructArgs {
            lines: None,
            lines_file: None,
            pairs_file: None,
            sigma_mhz: 0.0,
            missing_axis: None,
            hyperfine: None,
            pairing: None,
            weighted: false,
            symmetry: false,
        }
    }

    fn truth() -> (Vector3<f64>, [ResonancePair; 4]) {
        let b = Vector3::new(1.5, -2.0, 3.2);
        (b, resonances_all_axes(&RunConfig::default().params, &FieldVector::from_components(b)).unwrap())
    }

    fn recovered(m: &Map<String, Value>) -> Vector3<f64> {
        let c = &m["field"]["components_mt"];
        Vector3::new(c[0].as_f64().unwrap(), c[1].as_f64().unwrap(), c[2].as_f64().unwrap())
    }

    #[test]
    fn eight_lines_round_trip() {
        let (b, pairs) = truth();
        let a = ReconstructArgs { lines: Some(pairs.iter().flat_map(|p| [p.f_u_mhz, p.f_l_mhz]).collect()), symmetry: true, ..args() };
        let Output::Doc(m) = reconstruct(&ctx(), &a).unwrap() else { panic!() };
        let r = recovered(&m);
        assert!(orbit_distance(&b, &r).0 < 1e-9);
        assert!((r.norm() - b.norm()).abs() < 1e-9 * b.norm());
        assert_eq!(m["images_mt"].as_array().unwrap().len(), 48);
        assert_eq!(m["axes"].as_array().unwrap().len(), 4);
    }

    #[test]
    fn three_pairs_with_missing_axis() {
        let (b, pairs) = truth();
        let rows: String = pairs.iter().enumerate().filter(|(i, _)| *i != 2).map(|(_, p)| format!("{},{}\n", p.f_l_mhz, p.f_u_mhz)).collect();
        let parsed = parse_pairs(&format!("f_l_mhz,f_u_mhz\n{rows}"), 0.0).unwrap();
        assert_eq!(parsed.len(), 3);
        let m = render(&field_from_pairs(&RunConfig::default().params, &complete(&parsed, Some(2)), &PipelineOptions { dropped_axis: Some(2), ..Default::default() }).unwrap(), Some(2), false);
        let r = recovered(&m);
        assert!(orbit_distance(&b, &r).0 < 1e-6, "{}", orbit_distance(&b, &r).0);
        assert_eq!(m["missing_axis"], 3);
    }

    #[test]
    fn line_count_is_a_usage_error() {
        let a = ReconstructArgs { lines: Some(vec![2800.0, 2900.0, 2810.0, 2890.0, 2820.0]), ..args() };
        assert_eq!(reconstruct(&ctx(), &a).err().unwrap().exit_code(), 2);
    }

    #[test]
    fn inconsistent_pairs_are_solver_errors() {
        // splittings far below D cannot come from any field
        let a = ReconstructArgs { lines: Some(vec![100.0, 101.0, 102.0, 103.0, 104.0, 105.0, 106.0, 107.0]), ..args() };
        let e = reconstruct(&ctx(), &a).err().unwrap();
        assert_eq!(e.exit_code(), 3, "{e}");
    }

    #[test]
    fn pairs_from_forward_json() {
        let text = r#"{"schema": 1, "pairs": [{"axis": 1, "f_l_mhz": 2800.0, "f_u_mhz": 2940.0}]}"#;
        let p = parse_pairs(text, 0.01).unwrap();
        assert_eq!(p[0].sigma_l_mhz, 0.01);
        assert_eq!(p[0].f_u_mhz, 2940.0);
    }

    #[test]
    fn line_file_parsing() {
        let l = parse_lines("# lines\nfrequency_mhz,sigma_mhz\n2800.5, 0.02\n2940\n", 0.1).unwrap();
        assert_eq!(l, vec![SpectralLine::new(2800.5, 0.02), SpectralLine::new(2940.0, 0.1)]);
        assert!(parse_lines("2800,1,2\n", 0.0).is_err());
        assert!(parse_lines("2800\nabc\n", 0.0).is_err());
    }
}
