//! The `se3-diffuse` command-line driver.
//!
//! Every command writes its outputs plus a `*.manifest.json` (or
//! `manifest.json` inside an output directory) holding the resolved
//! configuration. Exit codes: 0 success, 1 usage, 2 numerical-domain error,
//! 3 I/O.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::igso3::TruncationConfig;
use crate::schedules::{RotationSchedule, RotationScheduleKind, Schedules, TranslationSchedule};
use crate::{Error, Result};

pub mod commands;
pub mod output;
pub mod table_io;

/// Directory for cached IGSO3 tables.
pub const CACHE_ENV: &str = "SE3_DIFFUSE_IGSO3_CACHE";

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_NUMERICAL: i32 = 2;
pub const EXIT_IO: i32 = 3;

#[derive(Parser, Debug)]
#[command(name = "se3-diffuse", version, about = "Diffusion on SO(3) and SE(3)^N")]
pub struct Cli {
    /// JSON object of flag values (keys are long flag names); flags given on
    /// the command line take precedence.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Isotropic Gaussian on SO(3): density, samples, scores and tables.
    #[command(subcommand)]
    Igso3(Igso3Command),
    /// Noise schedules.
    #[command(subcommand)]
    Schedule(ScheduleCommand),
    /// Discrete target on SO(3) with matched forward and reverse walks.
    #[command(subcommand)]
    Toy(ToyCommand),
    /// Reverse-diffuse backbones with an analytic score.
    SampleBackbones(SampleArgs),
}

#[derive(Subcommand, Debug)]
pub enum Igso3Command {
    /// CSV of (omega, f, df/domega) on a uniform angle grid.
    Eval(Igso3EvalArgs),
    /// Draws around the identity, as quaternions.
    Sample(Igso3SampleArgs),
    /// Conditional scores at draws around the identity.
    Score(Igso3SampleArgs),
    /// Builds a table and stores it in a file or the cache directory.
    Table(Igso3TableArgs),
}

#[derive(Subcommand, Debug)]
pub enum ScheduleCommand {
    /// CSV of both schedules on a uniform grid of s in [0, 1].
    Dump(ScheduleArgs),
}

#[derive(Subcommand, Debug)]
pub enum ToyCommand {
    /// Brownian motion started from the atoms.
    Forward(ToyArgs),
    /// Reverse walk from the uniform law using the exact mixture score.
    Reverse(ToyArgs),
    /// Two-sample KS statistics between two runs on the same grid.
    Compare(CompareArgs),
}

/// Heat-kernel series truncation.
#[derive(Args, Debug, Clone, serde::Serialize)]
pub struct SeriesArgs {
    /// Number of series terms L.
    #[arg(long, default_value_t = 2000)]
    pub terms: usize,
    /// Angle grid size M for tables.
    #[arg(long, default_value_t = 1000)]
    pub grid: usize,
    /// Angles below this use the small-angle limits.
    #[arg(long, default_value_t = 1e-6)]
    pub omega_eps: f64,
    /// Smallest admissible diffusion time.
    #[arg(long, default_value_t = 0.01)]
    pub t_min: f64,
}

impl SeriesArgs {
    pub fn truncation(&self) -> Result<TruncationConfig> {
        let cfg = TruncationConfig {
            series_terms: self.terms,
            angle_grid: self.grid,
            omega_eps: self.omega_eps,
            t_min: self.t_min,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args, Debug, Clone, serde::Serialize)]
pub struct Igso3EvalArgs {
    /// Diffusion time.
    #[arg(long)]
    pub t: f64,
    #[command(flatten)]
    #[serde(flatten)]
    pub series: SeriesArgs,
    #[arg(long, value_name = "CSV")]
    pub out: PathBuf,
}

#[derive(Args, Debug, Clone, serde::Serialize)]
pub struct Igso3SampleArgs {
    #[arg(long)]
    pub t: f64,
    /// Number of draws.
    #[arg(long, default_value_t = 1000)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    #[serde(flatten)]
    pub series: SeriesArgs,
    #[arg(long, value_name = "CSV")]
    pub out: PathBuf,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum TableFormat {
    Bin,
    Csv,
}

#[derive(Args, Debug, Clone, serde::Serialize)]
pub struct Igso3TableArgs {
    #[arg(long)]
    pub t: f64,
    #[command(flatten)]
    #[serde(flatten)]
    pub series: SeriesArgs,
    /// Output file; without it the table goes to the cache directory.
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = TableFormat::Bin)]
    pub format: TableFormat,
}

#[derive(Args, Debug, Clone, serde::Serialize)]
pub struct ScheduleArgs {
    /// Grid points on [0, 1].
    #[arg(long, default_value_t = 101)]
    pub points: usize,
    #[command(flatten)]
    #[serde(flatten)]
    pub schedule: ScheduleFlags,
    #[arg(long, value_name = "CSV")]
    pub out: PathBuf,
}

/// Schedule parameters.
#[derive(Args, Debug, Clone, serde::Serialize)]
pub struct ScheduleFlags {
    #[arg(long, default_value_t = 0.1)]
    pub beta_min: f64,
    #[arg(long, default_value_t = 20.0)]
    pub beta_max: f64,
    #[arg(long, default_value_t = 0.1)]
    pub sigma_min: f64,
    #[arg(long, default_value_t = 1.5)]
    pub sigma_max: f64,
    #[arg(long, value_enum, default_value_t = RotationScheduleKind::Logarithmic)]
    pub kind: RotationScheduleKind,
}

impl ScheduleFlags {
    pub fn schedules(&self) -> Result<Schedules> {
        Ok(Schedules {
            translation: TranslationSchedule::new(self.beta_min, self.beta_max)?,
            rotation: RotationSchedule::new(self.sigma_min, self.sigma_max, self.kind)?,
        })
    }
}

#[derive(Args, Debug, Clone, serde::Serialize)]
pub struct ToyArgs {
    /// Number of atoms K.
    #[arg(long, default_value_t = crate::toy::DEFAULT_ATOMS)]
    pub atoms: usize,
    /// Seed of the atom draw, kept apart from the path seed so that runs
    /// with different `--seed` share a target.
    #[arg(long, default_value_t = 0)]
    pub atom_seed: u64,
    #[arg(long, default_value_t = 5000)]
    pub paths: usize,
    /// Final time of the Brownian motion.
    #[arg(long = "T", visible_alias = "t-final", default_value_t = 4.0)]
    #[serde(rename = "T")]
    pub t_final: f64,
    /// Grid points on [0, T].
    #[arg(long, default_value_t = 200)]
    pub steps: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Times to record (nearest grid points). The first two grid points and
    /// the last are always recorded.
    #[arg(long, value_delimiter = ',', default_values_t = vec![1.0, 2.0, 3.0])]
    pub record_times: Vec<f64>,
    /// Histogram bins for the per-time summary.
    #[arg(long, default_value_t = 36)]
    pub bins: usize,
    #[command(flatten)]
    #[serde(flatten)]
    pub series: SeriesArgs,
    #[arg(long, value_name = "DIR")]
    pub out_dir: PathBuf,
}

#[derive(Args, Debug, Clone, serde::Serialize)]
pub struct CompareArgs {
    /// First run directory.
    #[arg(long, value_name = "DIR")]
    pub a: PathBuf,
    /// Second run directory.
    #[arg(long, value_name = "DIR")]
    pub b: PathBuf,
    #[arg(long, value_name = "JSON")]
    pub out: PathBuf,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScoreKind {
    /// Score of the reference law: the walk stays a reference draw.
    PriorOnly,
    /// Denoises towards a fixed ideal helix.
    FixedTarget,
}

#[derive(Args, Debug, Clone, serde::Serialize)]
pub struct SampleArgs {
    #[arg(long, default_value_t = 50)]
    pub n_residues: usize,
    /// Independent chains, simulated in parallel.
    #[arg(long, default_value_t = 1)]
    pub n_chains: usize,
    #[arg(long, default_value_t = 500)]
    pub n_steps: usize,
    #[arg(long, default_value_t = 0.01)]
    pub eps: f64,
    /// Noise scale of the reverse SDE.
    #[arg(long, default_value_t = 0.1)]
    pub zeta: f64,
    #[arg(long, value_enum, default_value_t = ScoreKind::PriorOnly)]
    pub score: ScoreKind,
    /// Seed of the reverse-SDE noise.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Seed of the initial reference draw.
    #[arg(long, default_value_t = 0)]
    pub init_seed: u64,
    /// Ideal-geometry JSON; the bundled geometry otherwise.
    #[arg(long, value_name = "JSON")]
    pub geometry: Option<PathBuf>,
    #[command(flatten)]
    #[serde(flatten)]
    pub schedule: ScheduleFlags,
    #[command(flatten)]
    #[serde(flatten)]
    pub series: SeriesArgs,
    #[arg(long, value_name = "PDB")]
    pub out: PathBuf,
    /// Full trajectory CSV.
    #[arg(long, value_name = "CSV")]
    pub trajectory: Option<PathBuf>,
    /// Keep every k-th step in the trajectory (the last step always).
    #[arg(long, default_value_t = 1)]
    pub trajectory_every: usize,
}

/// Exit code for a library error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Io { .. } | Error::Parse { .. } => EXIT_IO,
        e if e.is_numerical() => EXIT_NUMERICAL,
        Error::NotSkew { .. } | Error::NotTangent { .. } => EXIT_NUMERICAL,
        _ => EXIT_USAGE,
    }
}

/// Long flag names given on the command line, and the `--config` value.
fn scan_flags(args: &[String]) -> (Vec<String>, Option<PathBuf>) {
    let mut present = Vec::new();
    let mut config = None;
    let mut it = args.iter().skip(1).peekable();
    while let Some(a) = it.next() {
        if a == "--" {
            break;
        }
        if let Some(flag) = a.strip_prefix("--") {
            let (name, inline) = match flag.split_once('=') {
                Some((n, v)) => (n, Some(v.to_string())),
                None => (flag, None),
            };
            if name == "config" {
                config = inline.or_else(|| it.next().cloned()).map(PathBuf::from);
            } else {
                let name = if name == "t-final" { "T".to_string() } else { name.replace('_', "-") };
                present.push(name);
            }
        }
    }
    (present, config)
}

/// Flag tokens for config entries not already on the command line.
fn config_tokens(path: &Path, present: &[String]) -> Result<Vec<String>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let doc: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| Error::Parse { path: path.into(), msg: e.to_string() })?;
    let obj = doc.as_object().ok_or_else(|| Error::Parse {
        path: path.into(),
        msg: "config must be a JSON object".into(),
    })?;
    let mut tokens = Vec::new();
    for (key, value) in obj {
        let flag = if key == "T" { key.clone() } else { key.replace('_', "-") };
        if flag == "config" || present.contains(&flag) {
            continue;
        }
        let scalar = |v: &serde_json::Value| -> Result<String> {
            match v {
                serde_json::Value::String(s) => Ok(s.clone()),
                serde_json::Value::Number(n) => Ok(n.to_string()),
                _ => Err(Error::Parse { path: path.into(), msg: format!("unsupported value for {key}") }),
            }
        };
        match value {
            serde_json::Value::Bool(true) => tokens.push(format!("--{flag}")),
            serde_json::Value::Bool(false) | serde_json::Value::Null => {}
            serde_json::Value::Array(items) => {
                let parts = items.iter().map(scalar).collect::<Result<Vec<_>>>()?;
                tokens.push(format!("--{flag}={}", parts.join(",")));
            }
            v => tokens.push(format!("--{flag}={}", scalar(v)?)),
        }
    }
    Ok(tokens)
}

/// Parses `args` (including the program name) and runs the command.
/// Returns the process exit code; messages go to stderr.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString>,
{
    let args: Vec<String> = args.into_iter().map(|a| a.into().to_string_lossy().into_owned()).collect();
    let (present, config) = scan_flags(&args);
    let mut full = args.clone();
    if let Some(path) = &config {
        match config_tokens(path, &present) {
            Ok(tokens) => full.extend(tokens),
            Err(e) => {
                eprintln!("error: {e}");
                return exit_code(&e);
            }
        }
    }
    let cli = match Cli::try_parse_from(&full) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
        }
    };
    match commands::dispatch(&cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
