//! `splineaug`: reference-surface scripts, LLM-driven augmentation runs,
//! and B-rep statistics over STEP corpora.
//!
//! Exit codes: 0 success, 1 domain failure (nothing accepted, validation
//! failed), 2 usage or config error, 3 environment error.

mod augment;
mod inspect;
mod surfaces;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::builder::{PossibleValuesParser, TypedValueParser};
use clap::{ArgAction, Args, Parser, Subcommand, ValueEnum};
use splineaug::{Family, PipelineConfig, PromptMode};

#[derive(Parser)]
#[command(name = "splineaug", version, about = "Organic CAD data augmentation pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    #[command(flatten)]
    global: GlobalArgs,
}

#[derive(Args, Debug, Clone)]
pub struct GlobalArgs {
    /// Pipeline config (TOML). Defaults apply when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Override a config value, e.g. `--set llm_gateway.model_id=gpt-4o`.
    #[arg(long = "set", value_name = "SECTION.KEY=VALUE", global = true)]
    pub overrides: Vec<String>,

    /// More log output (-v info, -vv debug).
    #[arg(short, long, action = ArgAction::Count, global = true)]
    pub verbose: u8,
}

impl GlobalArgs {
    fn load_config(&self) -> Result<PipelineConfig, Failure> {
        PipelineConfig::load(self.config.as_deref(), &self.overrides).usage()
    }
}

fn family_parser() -> impl TypedValueParser<Value = Family> {
    PossibleValuesParser::new(Family::ALL.map(Family::name)).map(|s| s.parse::<Family>().expect("listed family"))
}

fn mode_parser() -> impl TypedValueParser<Value = PromptMode> {
    PossibleValuesParser::new(["full", "minus-rt", "minus-r"]).map(|s| s.parse::<PromptMode>().expect("listed mode"))
}

#[derive(Subcommand)]
enum Command {
    /// Write seeded reference-surface scripts with JSON sidecars.
    Surfaces(SurfacesArgs),
    /// Generate CAD programs for a list of design descriptions.
    #[command(args_override_self = true)]
    Augment(AugmentArgs),
    /// Compute B-rep statistics over a directory of STEP files.
    Analyze(AnalyzeArgs),
    /// Check one STEP file for a watertight, manifold solid.
    Validate(ValidateArgs),
    /// Serve the mock runner protocol on stdin/stdout.
    #[command(hide = true)]
    MockRunner,
}

#[derive(Args)]
pub struct SurfacesArgs {
    #[arg(long, value_parser = family_parser())]
    pub family: Family,
    #[arg(long, default_value_t = 1)]
    pub count: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "surfaces")]
    pub out_dir: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum BackendKind {
    Live,
    Replay,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum RunnerKind {
    Subprocess,
    Mock,
}

#[derive(Args)]
pub struct AugmentArgs {
    /// One description per line, plain text or `{"id", "description"}` JSON.
    #[arg(long)]
    pub descriptions: PathBuf,
    /// Category wording (TOML with noun/prefix/context/shape_guidance/postfix).
    #[arg(long, value_name = "CFG")]
    pub category: Option<PathBuf>,
    #[arg(long, value_parser = mode_parser(), default_value = "full")]
    pub mode: PromptMode,
    /// Reference surface families for full mode, cycled over samples.
    #[arg(long, value_parser = family_parser(), value_delimiter = ',')]
    pub family: Vec<Family>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = BackendKind::Live)]
    pub backend: BackendKind,
    /// Replay source, or the file live exchanges are recorded to.
    #[arg(long)]
    pub cassette: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = RunnerKind::Subprocess)]
    pub runner: RunnerKind,
    #[arg(long)]
    pub parallelism: Option<usize>,
    #[arg(long)]
    pub max_iterations: Option<usize>,
    /// Runs directory; defaults to `dataset_reporter.runs_dir`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Defaults to a digest of the inputs.
    #[arg(long)]
    pub run_id: Option<String>,
}

#[derive(Args)]
pub struct AnalyzeArgs {
    pub step_dir: PathBuf,
    #[arg(long, default_value = "report")]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct ValidateArgs {
    pub step_file: PathBuf,
}

/// An error with the exit code it maps to.
pub struct Failure {
    code: u8,
    error: anyhow::Error,
}

pub type CmdResult = Result<ExitCode, Failure>;

pub fn fail(code: u8, error: impl Into<anyhow::Error>) -> Failure {
    Failure {
        code,
        error: error.into(),
    }
}

pub trait OrExit<T> {
    fn usage(self) -> Result<T, Failure>;
    fn env(self) -> Result<T, Failure>;
}

impl<T, E: Into<anyhow::Error>> OrExit<T> for Result<T, E> {
    fn usage(self) -> Result<T, Failure> {
        self.map_err(|e| fail(2, e))
    }

    fn env(self) -> Result<T, Failure> {
        self.map_err(|e| fail(3, e))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.global.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new().filter_level(level).parse_default_env().init();

    let result = match cli.command {
        Command::Surfaces(a) => surfaces::run(&cli.global, &a),
        Command::Augment(a) => augment::run(&cli.global, &a),
        Command::Analyze(a) => inspect::analyze(&a),
        Command::Validate(a) => inspect::validate(&a),
        Command::MockRunner => inspect::mock_runner(),
    };
    match result {
        Ok(code) => code,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}
