use std::num::NonZeroUsize;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

/// NV-center vector magnetometry: resonances, field reconstruction and ODMR
/// line fits. Frequencies are in MHz, fields in mT, angles in degrees.
#[derive(Debug, Parser)]
#[command(name = "nvmag", version)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// TOML or key=value file with run settings; flags take precedence.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Zero-field splitting D.
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub d_mhz: Option<f64>,
    /// Strain splitting E.
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub e_mhz: Option<f64>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub gamma_mhz_per_mt: Option<f64>,
    /// Print versioned JSON instead of text or CSV.
    #[arg(long, global = true)]
    pub json: bool,
    #[arg(long, global = true, default_value_t = 1)]
    pub seed: u64,
    /// Worker threads for batch work; results keep input order.
    #[arg(long, global = true, default_value = "1")]
    pub jobs: NonZeroUsize,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Resonance pairs of all four NV axes for a given field.
    Forward(ForwardArgs),
    /// Field magnitude and cone angle of one axis from its resonance pair.
    Inverse(InverseArgs),
    /// Field vector from eight lines (or four pairs).
    Reconstruct(ReconstructArgs),
    /// Fit ODMR dips in a spectrum CSV, or tabulate a directory of spectra.
    Fit(FitArgs),
    /// Itemized accuracy budget at a given field and angle.
    Budget(BudgetArgs),
    /// Images of a field under the 48 cubic symmetries.
    Symmetry(SymmetryArgs),
    /// Lab-frame rotation from two coil fields measured in lattice coordinates.
    Calibrate(CalibrateArgs),
    /// Time the analytical chain against the gradient-descent baseline.
    Bench(BenchArgs),
}

/// A field given by components, by magnitude and polar angles, or by
/// magnitude and direction.
#[derive(Debug, Args, Clone, Default)]
pub struct FieldArgs {
    #[arg(long, allow_hyphen_values = true)]
    pub bx: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub by: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub bz: Option<f64>,
    /// Field magnitude in mT (an `mT` suffix is accepted).
    #[arg(long, value_parser = parse_mt)]
    pub b: Option<f64>,
    /// Polar angle from the lattice z axis.
    #[arg(long, allow_hyphen_values = true)]
    pub theta: Option<f64>,
    /// Azimuth from the lattice x axis.
    #[arg(long, allow_hyphen_values = true)]
    pub phi: Option<f64>,
    /// Field direction as x,y,z (need not be normalized).
    #[arg(long, value_parser = parse_vec3, allow_hyphen_values = true)]
    pub direction: Option<[f64; 3]>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SweepKind {
    /// Field magnitude along a fixed direction.
    Magnitude,
    /// Rotation of the field about an axis.
    Angle,
}

#[derive(Debug, Args)]
pub struct ForwardArgs {
    #[command(flatten)]
    pub field: FieldArgs,
    /// Emit a table over a magnitude or rotation-angle grid.
    #[arg(long)]
    pub sweep: Option<SweepKind>,
    /// Grid start (mT or degrees).
    #[arg(long, allow_hyphen_values = true)]
    pub from: Option<f64>,
    /// Grid end (mT or degrees).
    #[arg(long, allow_hyphen_values = true)]
    pub to: Option<f64>,
    #[arg(long, default_value_t = 201)]
    pub steps: usize,
    /// Rotation axis x,y,z for angle sweeps; defaults to one perpendicular
    /// to the field.
    #[arg(long, value_parser = parse_vec3, allow_hyphen_values = true)]
    pub rotation_axis: Option<[f64; 3]>,
}

#[derive(Debug, Args)]
pub struct InverseArgs {
    #[arg(long)]
    pub f_l: f64,
    #[arg(long)]
    pub f_u: f64,
    /// Fit uncertainty of each line.
    #[arg(long, default_value_t = 0.0)]
    pub sigma_mhz: f64,
}

#[derive(Debug, Args)]
pub struct ReconstructArgs {
    /// Comma-separated line frequencies.
    #[arg(long, value_delimiter = ',', conflicts_with_all = ["lines_file", "pairs_file"])]
    pub lines: Option<Vec<f64>>,
    /// One line per row: `frequency_mhz[,sigma_mhz]`; `#` starts a comment.
    #[arg(long, value_name = "PATH", conflicts_with = "pairs_file")]
    pub lines_file: Option<PathBuf>,
    /// Rows of `f_l_mhz,f_u_mhz[,sigma_l_mhz,sigma_u_mhz]`, or the JSON
    /// printed by `forward --json`; `-` reads standard input.
    #[arg(long, value_name = "PATH")]
    pub pairs_file: Option<PathBuf>,
    /// Uncertainty for lines given without one.
    #[arg(long, default_value_t = 0.0)]
    pub sigma_mhz: f64,
    /// Axis (1-4) without a resolved pair; needs six lines or three pairs.
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=4))]
    pub missing_axis: Option<u8>,
    #[arg(long)]
    pub hyperfine: Option<nvmag::HyperfineMode>,
    /// `nested` or `consistent`.
    #[arg(long)]
    pub pairing: Option<nvmag::reconstruct::PairingStrategy>,
    /// Weight the cones by their uncertainties.
    #[arg(long)]
    pub weighted: bool,
    /// Also list the distinct symmetry images of the result.
    #[arg(long)]
    pub symmetry: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModelArg {
    Gaussian,
    Lorentzian,
    Voigt,
    VoigtDerivative,
}

impl From<ModelArg> for nvmag::lineshape::LineModel {
    fn from(m: ModelArg) -> Self {
        use nvmag::lineshape::LineModel;
        match m {
            ModelArg::Gaussian => LineModel::Gaussian,
            ModelArg::Lorentzian => LineModel::Lorentzian,
            ModelArg::Voigt => LineModel::Voigt,
            ModelArg::VoigtDerivative => LineModel::VoigtDerivative,
        }
    }
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Spectrum CSV (`frequency_mhz,signal[,sigma]`) or a directory of them.
    pub path: PathBuf,
    #[arg(long, value_enum, default_value_t = ModelArg::Voigt)]
    pub model: ModelArg,
    /// Fit a linear baseline instead of fixing it at 1.
    #[arg(long)]
    pub linear_baseline: bool,
    /// Detected photons per second for the sensitivity estimate.
    #[arg(long)]
    pub photon_rate: Option<f64>,
}

#[derive(Debug, Args)]
pub struct BudgetArgs {
    /// Field magnitude in mT.
    #[arg(long, value_parser = parse_mt)]
    pub b: f64,
    /// Angle between field and NV axis.
    #[arg(long, default_value_t = 0.0)]
    pub theta: f64,
    /// Line fit uncertainty.
    #[arg(long, default_value_t = 0.01)]
    pub fit_sigma_mhz: f64,
    /// Uncertainty of the isotropic g-factor; sets σ_γ.
    #[arg(long)]
    pub g_factor_sigma: Option<f64>,
    /// g-tensor used for the anisotropy entry (both or neither).
    #[arg(long, requires = "g_par")]
    pub g_perp: Option<f64>,
    #[arg(long, requires = "g_perp")]
    pub g_par: Option<f64>,
}

#[derive(Debug, Args)]
pub struct SymmetryArgs {
    #[command(flatten)]
    pub field: FieldArgs,
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    /// First coil field in lattice coordinates, x,y,z.
    #[arg(long, value_parser = parse_vec3, allow_hyphen_values = true)]
    pub measured1: [f64; 3],
    #[arg(long, value_parser = parse_vec3, allow_hyphen_values = true)]
    pub measured2: [f64; 3],
    /// Known lab-frame direction of the first coil.
    #[arg(long, value_parser = parse_vec3, allow_hyphen_values = true)]
    pub target1: [f64; 3],
    #[arg(long, value_parser = parse_vec3, allow_hyphen_values = true)]
    pub target2: [f64; 3],
    /// Replace the second measured field by the symmetry image whose angle
    /// to the first best matches the target angle.
    #[arg(long)]
    pub resolve_symmetry: bool,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long, default_value_t = 600)]
    pub points: usize,
    /// Timed runs per field point.
    #[arg(long, default_value_t = 500)]
    pub runs: usize,
    #[arg(long, default_value_t = 50)]
    pub warmup: usize,
    #[arg(long, default_value_t = 1.0)]
    pub b_min: f64,
    #[arg(long, default_value_t = 20.0)]
    pub b_max: f64,
    /// Baseline start offset relative to |B|.
    #[arg(long, default_value_t = 0.05)]
    pub guess_perturbation: f64,
    /// Emit per-point mean times as a table.
    #[arg(long)]
    pub per_point: bool,
}

pub fn parse_vec3(s: &str) -> Result<[f64; 3], String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != 3 {
        return Err(format!("expected x,y,z, got '{s}'"));
    }
    let mut out = [0.0f64; 3];
    for (o, p) in out.iter_mut().zip(&parts) {
        *o = p.parse().map_err(|_| format!("'{p}' is not a number"))?;
        if !o.is_finite() {
            return Err(format!("'{p}' is not finite"));
        }
    }
    Ok(out)
}

pub fn parse_mt(s: &str) -> Result<f64, String> {
    let t = s.trim();
    let t = t.strip_suffix("mT").unwrap_or(t).trim();
    t.parse().map_err(|_| format!("'{s}' is not a field in mT"))
}
