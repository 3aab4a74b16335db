//! Command-line front end. [`run`] parses arguments, executes one verb and
//! returns the process exit code, so tests can drive it in-process.
//!
//! Exit codes: 0 success, 1 output could not be written, 2 invalid input or
//! arguments, 3 solver failure.

mod sweep;
mod verbs;

use std::ffi::OsString;
use std::fmt;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::config::{Method, Size, SourceSpec};
use crate::learn::LearnMethod;
use crate::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_SOLVER: i32 = 3;

/// Environment variable that overrides every seed given on the command line
/// or in a config file. Replays ignore it.
pub const SEED_ENV: &str = "SPARSESEP_SEED";

#[derive(Debug)]
pub(crate) enum CliError {
    Validation(String),
    Solver(Error),
    Io(String),
}

impl CliError {
    pub(crate) fn solver(e: Error) -> Self {
        CliError::Solver(e)
    }

    fn code(&self) -> i32 {
        match self {
            CliError::Validation(_) => EXIT_VALIDATION,
            CliError::Solver(_) => EXIT_SOLVER,
            CliError::Io(_) => EXIT_IO,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Validation(m) => write!(f, "invalid input: {m}"),
            CliError::Solver(e) => write!(f, "solver failed: {e}"),
            CliError::Io(m) => write!(f, "cannot write output: {m}"),
        }
    }
}

/// Reading and parsing problems are the caller's fault.
impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Validation(e.to_string())
    }
}

pub(crate) type CliResult<T> = std::result::Result<T, CliError>;

/// Wraps output-side failures.
pub(crate) fn out_err(e: impl fmt::Display) -> CliError {
    CliError::Io(e.to_string())
}

#[derive(Debug, Parser)]
#[command(name = "sparsesep", version, about = "Blind source separation with sparse representations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Subcommand, Serialize, Deserialize)]
#[serde(tag = "verb", rename_all = "kebab-case")]
pub(crate) enum Command {
    /// Mix sources through a random matrix and add noise.
    Mix(MixArgs),
    /// Separate mixtures with one of the solvers.
    Separate(SeparateArgs),
    /// Align estimated sources to the truth and write metrics.
    Evaluate(EvaluateArgs),
    /// Run an experiment grid from a JSON spec.
    Sweep(SweepArgs),
    /// Learn a patch dictionary from an image.
    DictLearn(DictLearnArgs),
    /// Render dictionary atoms as a mosaic image.
    DictRender(DictRenderArgs),
    /// Re-run the command recorded in a manifest.
    Replay(ReplayArgs),
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub(crate) struct MixArgs {
    /// Sources: image or CSV files, or generators such as `texture:3`.
    #[arg(long, num_args = 1.., required = true)]
    pub sources: Vec<SourceSpec>,
    /// Number of mixture channels.
    #[arg(long)]
    pub channels: usize,
    /// Noise level in dB against the peak source value; noiseless if absent.
    #[arg(long)]
    pub psnr: Option<f64>,
    /// Size of synthetic sources, `HxW`.
    #[arg(long)]
    pub size: Option<Size>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub(crate) struct SeparateArgs {
    #[arg(long, value_enum)]
    pub method: Method,
    /// Mixtures: one CSV with a row per channel, or one image per channel.
    #[arg(long, num_args = 1.., required = true)]
    pub input: Vec<PathBuf>,
    /// JSON run configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Number of sources; overrides the config.
    #[arg(long)]
    pub sources: Option<usize>,
    /// Channel image size `HxW`; overrides the config.
    #[arg(long)]
    pub size: Option<Size>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// True sources (CSV); adds a metrics file.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    /// True mixing matrix (CSV); adds the mixing criterion to the metrics.
    #[arg(long, requires = "truth")]
    pub truth_mixing: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// Resolved configuration, recorded in manifests.
    #[arg(skip)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resolved: Option<crate::config::SeparateConfig>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub(crate) struct EvaluateArgs {
    /// Estimated sources (CSV).
    #[arg(long)]
    pub estimate: PathBuf,
    /// True sources (CSV).
    #[arg(long)]
    pub truth: PathBuf,
    #[arg(long, requires = "truth_mixing")]
    pub estimate_mixing: Option<PathBuf>,
    #[arg(long, requires = "estimate_mixing")]
    pub truth_mixing: Option<PathBuf>,
    /// First column of every row.
    #[arg(long, default_value = "")]
    pub label: String,
    /// Append to an existing metrics file instead of replacing it.
    #[arg(long)]
    #[serde(default)]
    pub append: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub(crate) struct SweepArgs {
    /// Experiment spec (JSON).
    #[arg(long)]
    pub spec: Option<PathBuf>,
    /// Cells run in parallel.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Overrides the spec's output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(skip)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resolved: Option<crate::config::ExperimentSpec>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub(crate) struct DictLearnArgs {
    /// Training image: an image file or a generator such as `cartoon:1`.
    #[arg(long)]
    pub input: SourceSpec,
    #[arg(long)]
    pub size: Option<Size>,
    #[arg(long, value_enum, default_value = "ksvd")]
    pub method: LearnMethod,
    #[arg(long, default_value_t = 96)]
    pub atoms: usize,
    /// Atoms per patch for K-SVD, blocks per patch for block K-SVD.
    #[arg(long, default_value_t = 2)]
    pub sparsity: usize,
    #[arg(long, default_value_t = 3)]
    pub block_size: usize,
    #[arg(long, default_value_t = 50)]
    pub iterations: usize,
    #[arg(long, default_value_t = 8)]
    pub patch: usize,
    #[arg(long, default_value_t = 4)]
    pub stride: usize,
    /// Start from random training patches instead of the overcomplete DCT.
    #[arg(long)]
    #[serde(default)]
    pub init_from_patches: bool,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub(crate) struct DictRenderArgs {
    /// Atom matrix (CSV, one atom per column).
    #[arg(long)]
    pub dictionary: PathBuf,
    /// Block structure (JSON); atoms of a block are drawn next to each other.
    #[arg(long)]
    pub blocks: Option<PathBuf>,
    /// Patch height; atoms are square when `patch_w` is absent.
    #[arg(long)]
    pub patch: usize,
    #[arg(long)]
    pub patch_w: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub(crate) struct ReplayArgs {
    /// Manifest written by an earlier run.
    pub manifest: PathBuf,
    /// Output directory; the recorded one when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Record of a finished run; enough to repeat it with `replay`.
#[derive(Debug, Serialize, Deserialize)]
pub(crate) struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: Command,
    /// Facts about the run that are not inputs (sizes, noise level).
    #[serde(default)]
    pub info: serde_json::Value,
}

pub(crate) const MANIFEST: &str = "manifest.json";

pub(crate) fn write_manifest(dir: &Path, command: Command, info: serde_json::Value) -> CliResult<()> {
    let m = Manifest {
        tool: env!("CARGO_PKG_NAME").into(),
        version: env!("CARGO_PKG_VERSION").into(),
        command,
        info,
    };
    let text = serde_json::to_string_pretty(&m).map_err(out_err)?;
    std::fs::write(dir.join(MANIFEST), text + "\n").map_err(out_err)
}

pub(crate) fn create_dir(dir: &Path) -> CliResult<()> {
    std::fs::create_dir_all(dir).map_err(|e| out_err(format!("{}: {e}", dir.display())))
}

/// Execution context shared by the verbs.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct Ctx {
    /// Set while replaying: the recorded seeds are final.
    pub replay: bool,
}

impl Ctx {
    /// Environment override, then the explicit seed, then the fallback.
    pub fn seed(&self, explicit: Option<u64>, fallback: u64) -> CliResult<u64> {
        if !self.replay {
            if let Ok(v) = std::env::var(SEED_ENV) {
                return v
                    .trim()
                    .parse()
                    .map_err(|_| CliError::Validation(format!("{SEED_ENV}='{v}' is not an unsigned integer")));
            }
        }
        Ok(explicit.unwrap_or(fallback))
    }
}

fn dispatch(command: Command, ctx: Ctx) -> CliResult<()> {
    match command {
        Command::Mix(a) => verbs::mix(a, ctx),
        Command::Separate(a) => verbs::separate(a, ctx),
        Command::Evaluate(a) => verbs::evaluate(a),
        Command::Sweep(a) => sweep::sweep(a, ctx),
        Command::DictLearn(a) => verbs::dict_learn(a, ctx),
        Command::DictRender(a) => verbs::dict_render(a),
        Command::Replay(a) => replay(a),
    }
}

fn replay(a: ReplayArgs) -> CliResult<()> {
    let text = std::fs::read_to_string(&a.manifest)
        .map_err(|e| CliError::Validation(format!("{}: {e}", a.manifest.display())))?;
    let m: Manifest = serde_json::from_str(&text)
        .map_err(|e| CliError::Validation(format!("{}: {e}", a.manifest.display())))?;
    let mut command = m.command;
    if let Some(out) = a.out {
        match &mut command {
            Command::Mix(c) => c.out = out,
            Command::Separate(c) => c.out = out,
            Command::Evaluate(c) => c.out = out,
            Command::Sweep(c) => c.out = Some(out),
            Command::DictLearn(c) => c.out = out,
            Command::DictRender(c) => c.out = out,
            Command::Replay(_) => return Err(CliError::Validation("a manifest cannot record a replay".into())),
        }
    }
    if matches!(command, Command::Replay(_)) {
        return Err(CliError::Validation("a manifest cannot record a replay".into()));
    }
    dispatch(command, Ctx { replay: true })
}

/// Runs the command line `args` (program name first) and returns the exit
/// code. Messages go to stderr.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_VALIDATION } else { EXIT_OK };
        }
    };
    match dispatch(cli.command, Ctx::default()) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("sparsesep: {e}");
            e.code()
        }
    }
}
