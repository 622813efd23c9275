//! `lsrecon`: synthesize targets, fit level-set fields, extract meshes and
//! score reconstructions.
//!
//! Exit codes: 0 success, 1 numerical failure, 2 usage error, 3 I/O or
//! format error.

mod commands;

use std::ffi::OsString;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

pub const EXIT_NUMERIC: u8 = 1;
pub const EXIT_USAGE: u8 = 2;
pub const EXIT_IO: u8 = 3;

#[derive(Debug, Parser)]
#[command(name = "lsrecon", version, about = "Level-set surface reconstruction from oriented point clouds")]
#[command(args_override_self = true)]
pub struct Cli {
    /// Flat `key = value` file of flags for the subcommand; flags given on
    /// the command line win.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,

    /// Worker threads for data-parallel loops (default: all cores).
    #[arg(long, global = true, value_name = "N")]
    pub threads: Option<usize>,

    /// Fixed-order reductions, for bit-identical results across runs and
    /// thread counts.
    #[arg(long, global = true)]
    pub deterministic: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write an analytic shape's field, a sampled oriented cloud and a mesh.
    Synth(SynthArgs),
    /// Fit a field to an oriented point cloud.
    Fit(FitArgs),
    /// Extract an iso-surface mesh from a field.
    Extract(ExtractArgs),
    /// Compare a reconstruction with ground truth (IoU and Chamfer).
    Eval(EvalArgs),
    /// Compare the loss gradient with finite differences.
    Gradcheck(GradcheckArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ShapeKind {
    Sphere,
    Box,
    Torus,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(value_enum)]
    pub shape: ShapeKind,
    /// Sphere radius.
    #[arg(long, default_value_t = 0.5)]
    pub radius: f64,
    /// Box half-extent.
    #[arg(long, default_value_t = 0.4)]
    pub half: f64,
    /// Torus ring radius.
    #[arg(long, default_value_t = 0.5)]
    pub major: f64,
    /// Torus tube radius.
    #[arg(long, default_value_t = 0.2)]
    pub minor: f64,
    /// Number of cloud samples.
    #[arg(long, default_value_t = 2000)]
    pub count: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Resolution of the ground-truth field and mesh.
    #[arg(long, default_value_t = 64)]
    pub res: usize,
    /// Directory receiving field.lsf, cloud.pts and mesh.obj.
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Oriented point cloud (`x y z nx ny nz` per line).
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value_t = 32)]
    pub res: usize,
    #[arg(long, default_value_t = 2000)]
    pub iters: usize,
    /// Step size (default 0.1 h^2).
    #[arg(long)]
    pub step: Option<f64>,
    #[arg(long, default_value_t = 0.9)]
    pub momentum: f64,
    #[arg(long, default_value_t = 0.8)]
    pub alpha1: f64,
    #[arg(long, default_value_t = 1.0)]
    pub alpha2: f64,
    #[arg(long, default_value_t = 0.1)]
    pub alpha3: f64,
    #[arg(long, default_value_t = 0.1)]
    pub alpha4: f64,
    #[arg(long, default_value_t = 0.15)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 2.0)]
    pub p: f64,
    #[arg(long, default_value_t = 0.6, conflicts_with = "init_field")]
    pub init_radius: f64,
    /// Start from a saved field instead of a sphere.
    #[arg(long)]
    pub init_field: Option<PathBuf>,
    /// Relative loss decrease over ten logged steps below which to stop.
    #[arg(long, default_value_t = 1e-4)]
    pub stop_tol: f64,
    #[arg(long, default_value_t = 10)]
    pub log_every: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output field file.
    #[arg(long)]
    pub out: PathBuf,
    /// CSV of logged losses.
    #[arg(long)]
    pub log: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExtractArgs {
    #[arg(long)]
    pub field: PathBuf,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub iso: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Reconstruction: a field file or an `.obj` mesh.
    #[arg(long)]
    pub pred: PathBuf,
    /// Ground truth: a field file or an `.obj` mesh.
    #[arg(long)]
    pub gt: PathBuf,
    #[arg(long, default_value_t = 128)]
    pub iou_res: usize,
    #[arg(long, default_value_t = 10_000)]
    pub chamfer_samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Also write the `key=value` report here.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    #[arg(long, default_value_t = 12)]
    pub res: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 50)]
    pub nodes: usize,
    #[arg(long, default_value_t = 0.8)]
    pub alpha1: f64,
    #[arg(long, default_value_t = 1.0)]
    pub alpha2: f64,
    #[arg(long, default_value_t = 0.1)]
    pub alpha3: f64,
    #[arg(long, default_value_t = 0.1)]
    pub alpha4: f64,
    #[arg(long, default_value_t = 0.15)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 2.0)]
    pub p: f64,
    /// Corrupt the analytic gradient (negative control).
    #[arg(long, hide = true)]
    pub sabotage: bool,
}

const SUBCOMMANDS: [&str; 5] = ["synth", "fit", "extract", "eval", "gradcheck"];

/// Finds `--config <path>` or `--config=<path>` in raw arguments.
fn config_path(args: &[OsString]) -> Option<PathBuf> {
    let mut it = args.iter();
    while let Some(a) = it.next() {
        let s = a.to_string_lossy();
        if s == "--config" {
            return it.next().map(PathBuf::from);
        }
        if let Some(v) = s.strip_prefix("--config=") {
            return Some(PathBuf::from(v));
        }
    }
    None
}

/// Splices config entries in as flags right after the subcommand name, so
/// explicit flags later on the line override them.
fn inject_config(args: Vec<OsString>, entries: &[lsrecon::io::ConfigEntry]) -> Vec<OsString> {
    let Some(pos) = args.iter().position(|a| SUBCOMMANDS.contains(&a.to_string_lossy().as_ref())) else {
        return args;
    };
    let mut out: Vec<OsString> = args[..=pos].to_vec();
    for e in entries {
        let flag = format!("--{}", e.key.replace('_', "-"));
        match e.value.as_str() {
            "true" => out.push(flag.into()),
            "false" => {}
            v => {
                out.push(flag.into());
                out.push(v.into());
            }
        }
    }
    out.extend_from_slice(&args[pos + 1..]);
    out
}

fn main() -> ExitCode {
    let mut args: Vec<OsString> = std::env::args_os().collect();
    if let Some(path) = config_path(&args) {
        match lsrecon::io::read_config(&path) {
            Ok(entries) => args = inject_config(args, &entries),
            Err(e) => {
                eprintln!("error: {e}");
                return ExitCode::from(commands::exit_code(&e));
            }
        }
    }
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { 0 });
        }
    };
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be >= 1");
            return ExitCode::from(EXIT_USAGE);
        }
        if let Err(e) = lsrecon::set_threads(n) {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_USAGE);
        }
    }
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("error: {}", failure.message);
            ExitCode::from(failure.code)
        }
    }
}
