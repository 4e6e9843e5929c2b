//! `handover`: region grounding, grasp selection, success evaluation,
//! synthetic scenes and handover-point search from the command line.
//!
//! Exit codes: 0 success, 2 domain error, 3 vision-language service or cache
//! failure, 64 usage error.

// NaN must fail range checks, so they are written as `!(x >= lo)`.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use handover_core::vlm::VlmError;
use handover_core::Error;

pub const EXIT_DOMAIN: u8 = 2;
pub const EXIT_EXTERNAL: u8 = 3;
pub const EXIT_USAGE: u8 = 64;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Core(Error),
}

impl CliError {
    pub fn usage(msg: impl Into<String>) -> Self {
        CliError::Usage(msg.into())
    }

    fn name(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "Usage",
            CliError::Core(e) => e.name(),
        }
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::Core(Error::InvalidParam { .. }) => EXIT_USAGE,
            CliError::Core(e) if e.is_external() => EXIT_EXTERNAL,
            CliError::Core(_) => EXIT_DOMAIN,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => f.write_str(m),
            CliError::Core(e) => write!(f, "{e}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

impl From<VlmError> for CliError {
    fn from(e: VlmError) -> Self {
        CliError::Core(e.into())
    }
}

#[derive(Debug, Parser)]
#[command(name = "handover", version, about = "Robot-to-human handover planning")]
pub struct Cli {
    /// JSON config file; falls back to $HANDOVER_CONFIG.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Ask the vision-language model for human and robot grasp regions.
    Ground(GroundArgs),
    /// Pick one grasp from the scene's candidates given region masks.
    Select(SelectArgs),
    /// Run the ablation benchmark on synthetic scenes.
    Evaluate(EvaluateArgs),
    /// Write a synthetic scene directory.
    Synth(SynthArgs),
    /// Search the ergonomic handover point for a tracked arm.
    Pose(PoseArgs),
    /// Draw the numbered grid over an image.
    Annotate(AnnotateArgs),
    /// Ground, select and pose in one run.
    Pipeline(PipelineArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum VlmMode {
    Live,
    Mock,
    Replay,
}

#[derive(Debug, Args)]
pub struct VlmArgs {
    #[arg(long, value_enum, default_value = "replay")]
    pub vlm: VlmMode,
    /// Transcript directory. Replay reads it; live and mock record into it.
    #[arg(long)]
    pub cache: Option<PathBuf>,
    /// Scripted reply for `--vlm mock`; repeat for a re-prompt.
    #[arg(long = "mock-reply")]
    pub mock_reply: Vec<String>,
    /// Grid size per side.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..=32))]
    pub n: Option<u64>,
}

#[derive(Debug, Args)]
pub struct GroundArgs {
    /// Scene manifest.
    #[arg(long)]
    pub scene: PathBuf,
    #[command(flatten)]
    pub vlm: VlmArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SelectionFlags {
    /// full, no_robot_region, no_regions, random_in_robot_region, or a1..b2.
    #[arg(long, default_value = "full", value_parser = parse_mode)]
    pub mode: handover_core::selection::SelectionMode,
    #[arg(long, value_parser = parse_unit)]
    pub alpha: Option<f64>,
    #[arg(long, value_parser = parse_positive)]
    pub epsilon: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct SelectArgs {
    #[arg(long)]
    pub scene: PathBuf,
    /// Directory holding human_mask.pgm and robot_mask.pgm.
    #[arg(long)]
    pub masks: PathBuf,
    #[command(flatten)]
    pub sel: SelectionFlags,
    /// Report path.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Directory of synthetic scene directories; the default suite when absent.
    #[arg(long)]
    pub bench_dir: Option<PathBuf>,
    #[arg(long, default_value = "a1,a2,a3,b1,b2", value_delimiter = ',')]
    pub modes: Vec<String>,
    #[arg(long, default_value_t = 10, value_parser = clap::value_parser!(u64).range(1..))]
    pub trials: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_parser = parse_positive)]
    pub density: Option<f64>,
    #[arg(long, default_value_t = 100, value_parser = clap::value_parser!(u64).range(1..))]
    pub grasps: u64,
    /// Report directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// hammer, knife, mug, spatula or box.
    #[arg(long)]
    pub object: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_parser = parse_positive)]
    pub density: Option<f64>,
    #[arg(long, default_value_t = 100, value_parser = clap::value_parser!(u64).range(1..))]
    pub grasps: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct PoseArgs {
    /// Shoulder, elbow and wrist JSON.
    #[arg(long)]
    pub pose: PathBuf,
    /// `x,y,z` in the pose frame.
    #[arg(long, value_parser = parse_vec3, allow_hyphen_values = true)]
    pub robot_base: [f64; 3],
    #[arg(long, value_parser = parse_vec3, default_value = "0,0,1", allow_hyphen_values = true)]
    pub up: [f64; 3],
    #[arg(long, value_parser = parse_non_negative)]
    pub max_reach: Option<f64>,
    #[arg(long, value_parser = parse_positive)]
    pub granularity: Option<f64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct AnnotateArgs {
    /// Binary PPM.
    #[arg(long)]
    pub image: PathBuf,
    /// `x,y,w,h` in pixels.
    #[arg(long, value_parser = parse_bbox)]
    pub bbox: [usize; 4],
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..=32))]
    pub n: Option<u64>,
    /// PNG path.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct PipelineArgs {
    #[arg(long)]
    pub scene: PathBuf,
    #[command(flatten)]
    pub vlm: VlmArgs,
    #[command(flatten)]
    pub sel: SelectionFlags,
    /// Defaults to the value in a neighbouring synth.json.
    #[arg(long, value_parser = parse_vec3, allow_hyphen_values = true)]
    pub robot_base: Option<[f64; 3]>,
    #[arg(long, value_parser = parse_vec3, allow_hyphen_values = true)]
    pub up: Option<[f64; 3]>,
    #[arg(long, value_parser = parse_non_negative)]
    pub max_reach: Option<f64>,
    #[arg(long)]
    pub out: PathBuf,
}

fn parse_f64(s: &str) -> Result<f64, String> {
    let v: f64 = s.trim().parse().map_err(|_| format!("{s:?} is not a number"))?;
    if v.is_nan() {
        return Err("NaN is not allowed".into());
    }
    Ok(v)
}

fn parse_unit(s: &str) -> Result<f64, String> {
    let v = parse_f64(s)?;
    if (0.0..=1.0).contains(&v) {
        Ok(v)
    } else {
        Err(format!("{v} outside [0, 1]"))
    }
}

fn parse_positive(s: &str) -> Result<f64, String> {
    let v = parse_f64(s)?;
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(format!("{v} must be positive"))
    }
}

fn parse_non_negative(s: &str) -> Result<f64, String> {
    let v = parse_f64(s)?;
    if v >= 0.0 {
        Ok(v)
    } else {
        Err(format!("{v} must be non-negative"))
    }
}

fn parse_vec3(s: &str) -> Result<[f64; 3], String> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 3 {
        return Err(format!("{s:?} is not x,y,z"));
    }
    let mut out = [0.0; 3];
    for (o, p) in out.iter_mut().zip(parts) {
        *o = parse_f64(p)?;
        if !o.is_finite() {
            return Err(format!("{s:?} has a non-finite component"));
        }
    }
    Ok(out)
}

fn parse_bbox(s: &str) -> Result<[usize; 4], String> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 4 {
        return Err(format!("{s:?} is not x,y,w,h"));
    }
    let mut out = [0; 4];
    for (o, p) in out.iter_mut().zip(parts) {
        *o = p.trim().parse().map_err(|_| format!("{p:?} is not a pixel count"))?;
    }
    Ok(out)
}

fn parse_mode(s: &str) -> Result<handover_core::selection::SelectionMode, String> {
    use handover_core::selection::SelectionMode;
    let key = s.trim().to_ascii_lowercase();
    if let Ok(a) = key.parse::<handover_core::eval::Ablation>() {
        return Ok(a.mode());
    }
    SelectionMode::ALL
        .into_iter()
        .find(|m| {
            serde_json::to_value(m)
                .ok()
                .and_then(|v| v.as_str().map(|v| v == key))
                .unwrap_or(false)
        })
        .ok_or_else(|| format!("unknown mode {s:?}"))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {e}", e.name());
            ExitCode::from(e.exit_code())
        }
    }
}
