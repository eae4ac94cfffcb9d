//! Run configuration: defaults, then an optional config file, then flags.
//!
//! The file is TOML. Plain `key = value` lines with unquoted strings are
//! accepted too. NV parameters may sit at top level or in a `[params]` table.

use std::path::Path;

use nvmag::reconstruct::PairingStrategy;
use nvmag::{HyperfineMode, NvParams};
use serde::Deserialize;
use serde_json::{json, Value};

use crate::error::{read_file, CliError, CliResult};

pub const DEFAULT_PHOTON_RATE: f64 = 1e12;

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub params: NvParams,
    pub hyperfine: HyperfineMode,
    pub pairing: PairingStrategy,
    pub weighted: bool,
    pub symmetry: bool,
    /// Detected photons per second, for sensitivity estimates.
    pub photon_rate: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            params: NvParams::default(),
            hyperfine: HyperfineMode::None,
            pairing: PairingStrategy::Nested,
            weighted: false,
            symmetry: false,
            photon_rate: DEFAULT_PHOTON_RATE,
        }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct FileConfig {
    d_mhz: Option<f64>,
    e_mhz: Option<f64>,
    gamma_mhz_per_mt: Option<f64>,
    sigma_d_mhz: Option<f64>,
    sigma_e_mhz: Option<f64>,
    sigma_gamma_mhz_per_mt: Option<f64>,
    hyperfine: Option<HyperfineMode>,
    pairing: Option<String>,
    weighted: Option<bool>,
    symmetry: Option<bool>,
    photon_rate: Option<f64>,
}

/// Flag values that override the file.
#[derive(Debug, Default, Clone, Copy)]
pub struct Overrides {
    pub d_mhz: Option<f64>,
    pub e_mhz: Option<f64>,
    pub gamma_mhz_per_mt: Option<f64>,
}

impl RunConfig {
    pub fn load(path: Option<&Path>, overrides: Overrides) -> CliResult<Self> {
        let mut cfg = RunConfig::default();
        if let Some(path) = path {
            let text = read_file(path)?;
            let file = parse_file(&text).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
            cfg.apply(file)?;
        }
        let p = &mut cfg.params;
        if let Some(v) = overrides.d_mhz {
            p.d_mhz = v;
        }
        if let Some(v) = overrides.e_mhz {
            p.e_mhz = v;
        }
        if let Some(v) = overrides.gamma_mhz_per_mt {
            p.gamma_mhz_per_mt = v;
        }
        cfg.params.validate().map_err(|e| CliError::usage(e.to_string()))?;
        if !(cfg.photon_rate > 0.0 && cfg.photon_rate.is_finite()) {
            return Err(CliError::usage(format!("photon_rate must be positive, got {}", cfg.photon_rate)));
        }
        Ok(cfg)
    }

    fn apply(&mut self, f: FileConfig) -> CliResult<()> {
        let p = &mut self.params;
        let set = |slot: &mut f64, v: Option<f64>| {
            if let Some(v) = v {
                *slot = v;
            }
        };
        set(&mut p.d_mhz, f.d_mhz);
        set(&mut p.e_mhz, f.e_mhz);
        set(&mut p.gamma_mhz_per_mt, f.gamma_mhz_per_mt);
        set(&mut p.sigma_d_mhz, f.sigma_d_mhz);
        set(&mut p.sigma_e_mhz, f.sigma_e_mhz);
        set(&mut p.sigma_gamma_mhz_per_mt, f.sigma_gamma_mhz_per_mt);
        set(&mut self.photon_rate, f.photon_rate);
        if let Some(h) = f.hyperfine {
            self.hyperfine = h;
        }
        if let Some(s) = f.pairing {
            self.pairing = s.parse().map_err(|e: nvmag::Error| CliError::usage(e.to_string()))?;
        }
        if let Some(w) = f.weighted {
            self.weighted = w;
        }
        if let Some(s) = f.symmetry {
            self.symmetry = s;
        }
        Ok(())
    }

    /// Echo of the effective settings, with units in the key names.
    pub fn to_json(&self) -> Value {
        let p = &self.params;
        json!({
            "d_mhz": p.d_mhz,
            "e_mhz": p.e_mhz,
            "gamma_mhz_per_mt": p.gamma_mhz_per_mt,
            "sigma_d_mhz": p.sigma_d_mhz,
            "sigma_e_mhz": p.sigma_e_mhz,
            "sigma_gamma_mhz_per_mt": p.sigma_gamma_mhz_per_mt,
            "hyperfine": self.hyperfine,
            "pairing": self.pairing,
            "weighted": self.weighted,
            "symmetry": self.symmetry,
            "photon_rate_per_s": self.photon_rate,
        })
    }
}

fn parse_file(text: &str) -> Result<FileConfig, String> {
    let mut table: toml::Table = match text.parse() {
        Ok(t) => t,
        Err(toml_err) => key_value_table(text).map_err(|kv_err| format!("{kv_err} (as TOML: {})", toml_err.message()))?,
    };
    if let Some(section) = table.remove("params") {
        let toml::Value::Table(section) = section else {
            return Err("`params` must be a table".into());
        };
        for (k, v) in section {
            if table.insert(k.clone(), v).is_some() {
                return Err(format!("`{k}` is set both at top level and in [params]"));
            }
        }
    }
    FileConfig::deserialize(table).map_err(|e| e.message().to_string())
}

/// `key = value` lines; values are numbers, booleans or bare strings.
fn key_value_table(text: &str) -> Result<toml::Table, String> {
    let mut t = toml::Table::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() || (line.starts_with('[') && line.ends_with(']')) {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| format!("line {}: expected key = value", n + 1))?;
        let v = v.trim().trim_matches('"');
        let value = if let Ok(x) = v.parse::<f64>() {
            toml::Value::Float(x)
        } else if let Ok(b) = v.parse::<bool>() {
            toml::Value::Boolean(b)
        } else {
            toml::Value::String(v.to_string())
        };
        t.insert(k.trim().to_string(), value);
    }
    Ok(t)
}
