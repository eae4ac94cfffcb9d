// `!(x > 0.0)` is how NaN gets rejected along with non-positive values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod args;
mod commands;
mod config;
mod error;
mod output;

use clap::Parser;

use args::{Cli, Command};
use commands::{Ctx, Output};
use config::{Overrides, RunConfig};
use error::CliResult;

fn run(cli: Cli) -> CliResult<String> {
    let g = &cli.global;
    let overrides = Overrides { d_mhz: g.d_mhz, e_mhz: g.e_mhz, gamma_mhz_per_mt: g.gamma_mhz_per_mt };
    let cfg = RunConfig::load(g.config.as_deref(), overrides)?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(g.jobs.get())
        .build_global()
        .map_err(|e| error::CliError::usage(format!("cannot start {} worker threads: {e}", g.jobs)))?;

    let config_json = cfg.to_json();
    let ctx = Ctx { cfg, seed: g.seed };
    let (name, out) = match &cli.command {
        Command::Forward(a) => ("forward", commands::forward(&ctx, a)?),
        Command::Inverse(a) => ("inverse", commands::inverse(&ctx, a)?),
        Command::Reconstruct(a) => ("reconstruct", commands::reconstruct::reconstruct(&ctx, a)?),
        Command::Fit(a) => ("fit", commands::fit::fit(&ctx, a)?),
        Command::Budget(a) => ("budget", commands::budget(&ctx, a)?),
        Command::Symmetry(a) => ("symmetry", commands::symmetry(&ctx, a)?),
        Command::Calibrate(a) => ("calibrate", commands::calibrate(&ctx, a)?),
        Command::Bench(a) => ("bench", commands::bench::bench(&ctx, a)?),
    };

    Ok(match (out, g.json) {
        (Output::Doc(body), true) => output::to_json_string(&output::envelope(name, config_json, body)) + "\n",
        (Output::Doc(body), false) => output::to_text(&serde_json::Value::Object(body)),
        (Output::Table(mut body, table), true) => {
            body.insert("table".into(), table.to_json());
            output::to_json_string(&output::envelope(name, config_json, body)) + "\n"
        }
        (Output::Table(_, table), false) => table.to_csv(),
    })
}

fn main() {
    let cli = Cli::parse();
    match run(cli) {
        Ok(text) => print!("{text}"),
        Err(e) => {
            eprintln!("error [{}]: {e}", e.kind());
            std::process::exit(e.exit_code());
        }
    }
}
