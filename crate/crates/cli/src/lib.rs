//! Command-line front end: `synthesize`, `evaluate`, `compose` and `dataset`.
//!
//! Exit codes are 0 on success, 1 for usage or input problems and 2 when a
//! backend or the pipeline fails at runtime.

pub mod commands;
pub mod config;

use clap::{Args, Parser, Subcommand};
use config::BackendKind;
use std::ffi::OsString;
use std::path::PathBuf;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Input(_) => EXIT_USAGE,
            CliError::Runtime(_) => EXIT_RUNTIME,
        }
    }
}

impl From<avatarforge_core::pipeline::PipelineError> for CliError {
    fn from(e: avatarforge_core::pipeline::PipelineError) -> Self {
        if e.is_backend() {
            CliError::Runtime(e.to_string())
        } else {
            CliError::Input(e.to_string())
        }
    }
}

impl From<avatarforge_core::media::MediaError> for CliError {
    fn from(e: avatarforge_core::media::MediaError) -> Self {
        CliError::Input(e.to_string())
    }
}

#[derive(Debug, Parser)]
#[command(name = "avatarforge", version, about = "Pose- and text-guided human video synthesis and evaluation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Render a video from a pose sequence and the configured prompt.
    Synthesize(SynthesizeArgs),
    /// Score a frame directory and write report.json/.csv/.md.
    Evaluate(EvaluateArgs),
    /// Run the background stage and write the plate and per-pose masks.
    Compose(ComposeArgs),
    /// Build an adapter training job from images or videos.
    Dataset(DatasetArgs),
}

#[derive(Debug, Args)]
pub struct BackendArgs {
    /// TOML run configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub backend: Option<BackendKind>,
    /// Sidecar base URL; falls back to AVATARFORGE_ENDPOINT.
    #[arg(long)]
    pub endpoint: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct SynthesizeArgs {
    #[command(flatten)]
    pub common: BackendArgs,
    /// Pose sequence JSON.
    #[arg(long)]
    pub poses: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub common: BackendArgs,
    /// Directory of frames (manifest.json or sorted PNGs).
    #[arg(long)]
    pub frames: PathBuf,
    /// Directory of per-frame human masks.
    #[arg(long)]
    pub masks: Option<PathBuf>,
    /// Conditioning poses for Pose MSE.
    #[arg(long)]
    pub poses: Option<PathBuf>,
    /// Prompt for text alignment; defaults to the configured prompt.
    #[arg(long)]
    pub prompt: Option<String>,
    #[arg(long)]
    pub svr_model: Option<PathBuf>,
    #[arg(long)]
    pub niqe_model: Option<PathBuf>,
    /// Method label in the report.
    #[arg(long, default_value = avatarforge_core::report::DEFAULT_LABEL)]
    pub label: String,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ComposeArgs {
    #[command(flatten)]
    pub common: BackendArgs,
    #[arg(long)]
    pub poses: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
#[command(group(clap::ArgGroup::new("mode").required(true).args(["intra", "inter"])))]
pub struct DatasetArgs {
    #[command(flatten)]
    pub common: BackendArgs,
    /// Crop dataset for the clothes or face adapter.
    #[arg(long, value_enum)]
    pub intra: Option<IntraKind>,
    /// Consecutive-frame dataset; every --frames directory is one video.
    #[arg(long)]
    pub inter: bool,
    #[arg(long, required = true)]
    pub frames: Vec<PathBuf>,
    /// Caption for intra crops; defaults to the refined configured prompt.
    #[arg(long)]
    pub prompt: Option<String>,
    /// Output directory; defaults to the configured adapter_job_dir.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum IntraKind {
    Clothes,
    Face,
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let result = match &cli.command {
        Command::Synthesize(a) => commands::synthesize(a),
        Command::Evaluate(a) => commands::evaluate(a),
        Command::Compose(a) => commands::compose(a),
        Command::Dataset(a) => commands::dataset(a),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("avatarforge: {e}");
            e.exit_code()
        }
    }
}
