//! Command-line front end for the lighting pipeline.
//!
//! [`run`] parses arguments, executes one subcommand and returns the process
//! exit code: 0 on success, 1 for usage errors, 2 for data or format errors.

mod commands;
pub mod layout;

use std::ffi::OsString;
use std::fmt;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use unilight_core::{Error, PipelineConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "unilight", version, about = "Multi-modal lighting dataset, training and evaluation tools")]
pub struct Cli {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// TOML pipeline configuration; every key is optional.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Seed for every random choice (overrides `learn.seed`).
    #[arg(long, global = true, value_name = "U64")]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Worker threads for per-panorama work (default: all cores).
    #[arg(long, global = true, value_name = "N")]
    pub jobs: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RadianceFormat {
    Hdr,
    Pfm,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build crops, envmap encodings, SH ground truth and light lists from a directory of panoramas.
    Dataset {
        /// Directory of .hdr / .pfm panoramas (default: `dataset.panoramas` from the config).
        input: Option<PathBuf>,
    },
    /// Fit degree-3 SH coefficients to a panorama; writes sh.json.
    FitSh { map: PathBuf },
    /// Render an SH document to an equirectangular radiance map.
    RenderSh {
        sh: PathBuf,
        #[arg(long, default_value_t = 256)]
        width: usize,
        #[arg(long, value_enum, default_value_t = RadianceFormat::Hdr)]
        format: RadianceFormat,
    },
    /// Detect dominant lights in a panorama; writes lights.json.
    DetectLights { map: PathBuf },
    /// Train the encoder on a dataset directory (or the synthetic toy corpus).
    Train {
        dataset: Option<PathBuf>,
        /// Use the synthetic toy corpus (training split) instead of a dataset directory.
        #[arg(long, conflicts_with = "dataset")]
        toy: bool,
        /// Overrides `learn.steps`.
        #[arg(long)]
        steps: Option<usize>,
    },
    /// Embed every sample of a dataset in all four modalities; writes one store per modality.
    Embed {
        dataset: Option<PathBuf>,
        #[arg(long)]
        checkpoint: PathBuf,
        /// Embed the held-out split of the synthetic toy corpus.
        #[arg(long, conflicts_with = "dataset")]
        toy: bool,
    },
    /// Cross-modal retrieval over two or more embedding stores; writes retrieval.csv.
    EvalRetrieval {
        #[arg(required = true, num_args = 2..)]
        stores: Vec<PathBuf>,
    },
    /// Embedding similarity of yawed panoramas against the unrotated one; writes rotation.csv.
    RotateExp {
        /// Panorama files or directories of panoramas.
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long)]
        checkpoint: PathBuf,
    },
    /// Full-reference image metrics for predicted renders; writes render_metrics.csv.
    EvalRender {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        gt: PathBuf,
    },
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(Error),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Data(e) => write!(f, "{e}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Data(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Data(Error::Io(e))
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Data(_) => EXIT_DATA,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

/// Resolved configuration shared by all subcommands.
#[derive(Debug)]
pub struct Context {
    pub config: PipelineConfig,
    pub out: PathBuf,
    pub pool: rayon::ThreadPool,
}

impl Context {
    fn new(common: &CommonArgs) -> CliResult<Self> {
        let mut config = match &common.config {
            Some(p) => PipelineConfig::from_toml(&std::fs::read_to_string(p)?)?,
            None => PipelineConfig::default(),
        };
        if let Some(seed) = common.seed {
            config.learn.seed = seed;
        }
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(common.jobs.unwrap_or(0))
            .build()
            .map_err(|e| CliError::Usage(format!("cannot start worker pool: {e}")))?;
        Ok(Self { config, out: common.out.clone().unwrap_or_else(|| PathBuf::from(".")), pool })
    }
}

/// Runs the command line `argv` (including the program name) and returns the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    if cli.common.jobs == Some(0) {
        eprintln!("usage error: --jobs must be at least 1");
        return EXIT_USAGE;
    }
    match Context::new(&cli.common).and_then(|ctx| commands::execute(&cli.command, &ctx)) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
