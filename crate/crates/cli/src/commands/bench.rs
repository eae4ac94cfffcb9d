use nvmag::bench::{run_bench, BenchConfig};
use serde_json::{json, Map};

use super::{Ctx, Output};
use crate::args::BenchArgs;
use crate::error::{CliError, CliResult};
use crate::output::{Cell, Table};

/// Fewest timed runs for which the summary quantiles mean anything.
const MIN_TIMED_RUNS: usize = 100;

/// Timing runs on the calling thread only; `--jobs` does not apply.
pub fn bench(ctx: &Ctx, args: &BenchArgs) -> CliResult<Output> {
    if args.points.saturating_mul(args.runs) < MIN_TIMED_RUNS {
        return Err(CliError::usage(format!("need at least {MIN_TIMED_RUNS} timed runs (points × runs)")));
    }
    if !(args.b_min > 0.0 && args.b_max >= args.b_min && args.b_max.is_finite()) {
        return Err(CliError::usage("need 0 < --b-min <= --b-max"));
    }
    if !(args.guess_perturbation >= 0.0 && args.guess_perturbation.is_finite()) {
        return Err(CliError::usage("--guess-perturbation must be finite and >= 0"));
    }
    let cfg = BenchConfig {
        points: args.points,
        runs_per_point: args.runs,
        seed: ctx.seed,
        warmup: args.warmup,
        b_min_mt: args.b_min,
        b_max_mt: args.b_max,
        guess_perturbation: args.guess_perturbation,
    };
    let r = run_bench(&ctx.cfg.params, &cfg)?;

    let mut out = Map::new();
    out.insert(
        "protocol".into(),
        json!({
            "points": cfg.points,
            "runs_per_point": cfg.runs_per_point,
            "warmup": cfg.warmup,
            "seed": cfg.seed,
            "b_min_mt": cfg.b_min_mt,
            "b_max_mt": cfg.b_max_mt,
            "guess_perturbation": cfg.guess_perturbation,
        }),
    );
    out.insert("timed_runs".into(), json!(r.samples));
    out.insert("analytical_us".into(), serde_json::to_value(r.analytical).expect("plain struct"));
    out.insert("numerical_us".into(), serde_json::to_value(r.numerical).expect("plain struct"));
    out.insert("speedup_median".into(), json!(r.speedup()));
    out.insert(
        "agreement".into(),
        json!({
            "max_angle_rad": r.max_angle_rad,
            "max_component_diff_mt": r.max_component_diff_mt,
            "baseline_failures": r.baseline_failures,
            "baseline_local_minima": r.baseline_local_minima,
        }),
    );
    out.insert("redrawn_fields".into(), json!(r.redrawn));

    if !args.per_point {
        return Ok(Output::Doc(out));
    }
    let mut t = Table::new(&["point", "analytical_mean_us", "numerical_mean_us"]);
    for (k, (a, n)) in r.analytical_us.iter().zip(&r.numerical_us).enumerate() {
        t.rows.push(vec![Cell::Num(k as f64), Cell::Num(*a), Cell::Num(*n)]);
    }
    Ok(Output::Table(out, t))
}
