//! The `diagraph` command line: synthesize datasets, convert between
//! annotation formats, simulate detector noise, recognize relation tuples and
//! evaluate against ground truth.
//!
//! Exit codes: 0 success, 1 validation failure, 2 I/O or parse error. Every
//! command writes a `run.json` manifest into its output directory.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use diagraph_core::model::DiagramKind;

pub mod commands;
pub mod error;
pub mod input;
pub mod manifest;

pub use commands::{cmd_convert, cmd_evaluate, cmd_perturb, cmd_recognize, cmd_synthesize};
pub use error::CliError;
pub use manifest::{config_hash, RunManifest, RUN_MANIFEST_FILE};

#[derive(Debug, Parser)]
#[command(
    name = "diagraph",
    version,
    about = "Structure-diagram synthesis, recognition and evaluation"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic dataset of SVG diagrams and DOTA ground truth.
    Synthesize(SynthesizeArgs),
    /// Convert annotation sets between DOTA, COCO and detection files.
    Convert(ConvertArgs),
    /// Perturb annotation sets with simulated detector noise.
    Perturb(PerturbArgs),
    /// Aggregate annotations or detections into relation tuples.
    Recognize(RecognizeArgs),
    /// Score detections against ground truth and tuples against gold.
    Evaluate(EvaluateArgs),
}

#[derive(Debug, Args)]
pub struct SynthesizeArgs {
    #[arg(long)]
    pub kind: DiagramKind,
    #[arg(long, default_value_t = 1)]
    pub count: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Synthesis configuration JSON; defaults apply to missing fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Dota,
    Coco,
    Detections,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Space {
    Native,
    #[value(name = "scaled-1024")]
    Scaled1024,
}

impl From<Space> for diagraph_core::formats::CoordinateSpace {
    fn from(s: Space) -> Self {
        match s {
            Space::Native => Self::Native,
            Space::Scaled1024 => Self::Scaled1024,
        }
    }
}

#[derive(Debug, Args)]
pub struct SourceArgs {
    /// Dataset directory, DOTA file or directory, COCO document, detection file or set JSON.
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Sets supplying kind, canvas size and text blocks for detection files.
    #[arg(long)]
    pub reference: Option<PathBuf>,
    /// Kind assumed for native detection files without a reference.
    #[arg(long)]
    pub kind: Option<DiagramKind>,
}

#[derive(Debug, Args)]
pub struct ConvertArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    #[arg(long, value_enum)]
    pub to: OutputFormat,
    /// Coordinate space of written detection files.
    #[arg(long, value_enum, default_value = "native")]
    pub space: Space,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct PerturbArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    /// Noise configuration JSON; omitted means zero noise.
    #[arg(long)]
    pub noise: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Coordinate space of the detection files written alongside.
    #[arg(long, value_enum, default_value = "native")]
    pub space: Space,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct RecognizeArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    /// Aggregator configuration JSON.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Ground-truth annotation sets.
    #[arg(long)]
    pub gt: PathBuf,
    /// Detections to score; detection files take metadata from the ground truth.
    #[arg(long = "in")]
    pub input: Option<PathBuf>,
    /// Predicted tuple files (`<diagram_id>.jsonl`); otherwise tuples are recognized from `--in`.
    #[arg(long)]
    pub tuples: Option<PathBuf>,
    /// Gold tuple files; otherwise tuples are recognized from the ground truth.
    #[arg(long)]
    pub gold: Option<PathBuf>,
    #[arg(long, default_value_t = diagraph_core::metrics::IOU_THRESHOLD)]
    pub iou_threshold: f64,
    /// Aggregator configuration JSON used when recognizing tuples.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

/// Parses `argv` (program name first), runs the command and returns the
/// process exit code. Failures are printed to stderr as one JSON object.
pub fn run<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<String>,
{
    let argv: Vec<String> = argv.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            print!("{e}");
            return 0;
        }
        Err(e) => {
            let err = CliError::validation(e.to_string().trim().to_string());
            eprintln!("{}", err.to_json());
            return err.exit_code();
        }
    };
    match execute(&cli, &argv[1.min(argv.len())..]) {
        Ok(m) => {
            log::info!("{} finished, manifest hash {}", m.command, m.config_hash);
            0
        }
        Err(e) => {
            eprintln!("{}", e.to_json());
            e.exit_code()
        }
    }
}

/// Runs a parsed command; `args` is recorded in the run manifest.
pub fn execute(cli: &Cli, args: &[String]) -> Result<RunManifest, CliError> {
    match &cli.command {
        Command::Synthesize(a) => cmd_synthesize(a, args),
        Command::Convert(a) => cmd_convert(a, args),
        Command::Perturb(a) => cmd_perturb(a, args),
        Command::Recognize(a) => cmd_recognize(a, args),
        Command::Evaluate(a) => cmd_evaluate(a, args),
    }
}
