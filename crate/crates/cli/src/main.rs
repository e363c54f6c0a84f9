//! `voxfilm` — design, slice, project, and simulate film-stack volumetric
//! displays from a single JSON manifest.
//!
//! Exit codes: 0 success, 1 unreadable or malformed input data,
//! 2 invalid parameters or manifest.

mod commands;
mod manifest;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use manifest::{Manifest, NormalizeOpt};

#[derive(Debug)]
pub enum CliError {
    /// Unreadable files, undecodable images, malformed data files.
    Io(String),
    /// Bad parameters, bad manifest, out-of-range arguments.
    Validation(String),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Io(m) | CliError::Validation(m) => write!(f, "{m}"),
        }
    }
}

impl From<voxfilm::Error> for CliError {
    fn from(e: voxfilm::Error) -> Self {
        if e.is_io() {
            CliError::Io(e.to_string())
        } else {
            CliError::Validation(e.to_string())
        }
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Io(_) => 1,
            CliError::Validation(_) => 2,
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "voxfilm", version, about = "Multi-view film-stack volumetric display toolkit")]
struct Cli {
    /// JSON manifest; omitted sections fall back to the reference device
    /// parameters.
    #[arg(long, global = true)]
    manifest: Option<PathBuf>,

    /// Output directory (overrides the manifest).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Worker threads, 0 = auto.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,

    /// Output bit depth (overrides the manifest).
    #[arg(long, global = true, value_parser = ["8", "16"])]
    bit_depth: Option<String>,

    /// Projection normalization (overrides the manifest).
    #[arg(long, global = true, value_enum)]
    normalize: Option<NormalizeOpt>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Compute the voxel volume from the manifest patterns and write the
    /// printable layer images plus a run report.
    Design,
    /// Simulate the projected pattern of each view and report crosstalk
    /// against the originals.
    Project {
        /// Comma-separated view labels; default: all patterns.
        #[arg(long, value_delimiter = ',')]
        views: Vec<String>,
    },
    /// Rasterize a coloured point cloud into per-film layer images.
    Slice {
        /// ASCII point cloud, one "x y z r g b" record per line.
        #[arg(long)]
        cloud: PathBuf,
        /// How points sharing a raster cell combine.
        #[arg(long, value_enum, default_value_t = CombineArg::Max)]
        combine: CombineArg,
    },
    /// Render oblique views of the designed stack, or run the sandwich
    /// attenuation sweep.
    Simulate {
        /// Comma-separated view angles in degrees about the Y axis.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        theta: Vec<f64>,
        /// Render a sliced point cloud instead of the pattern design.
        #[arg(long, requires = "theta")]
        cloud: Option<PathBuf>,
        /// Sweep the number of clear films on one side of a printed test
        /// chart.
        #[arg(long, value_enum, conflicts_with_all = ["theta", "cloud"])]
        sweep: Option<SweepKind>,
    },
    /// Print the resolved configuration and the derived stack metrics.
    Info,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SweepKind {
    /// Films between the UV source and the printed layer.
    Uv,
    /// Films between the printed layer and the camera.
    Vis,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum CombineArg {
    /// Brightest ink wins (saturating deposition).
    Max,
    /// Average the cell's points.
    Mean,
}

impl CombineArg {
    fn to_rule(self) -> voxfilm::CombineRule {
        match self {
            CombineArg::Max => voxfilm::CombineRule::Max,
            CombineArg::Mean => voxfilm::CombineRule::Mean,
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn run(cli: &Cli) -> Result<(), CliError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads)
        .build_global()
        .map_err(|e| CliError::Validation(format!("thread pool: {e}")))?;

    let manifest = match &cli.manifest {
        Some(path) => Manifest::load(path)?,
        None => Manifest::default(),
    };
    let kind = match &cli.command {
        Command::Slice { .. } => manifest::ContentKind::PointCloud,
        Command::Simulate { cloud: Some(_), .. } => manifest::ContentKind::PointCloud,
        _ => manifest::ContentKind::Patterns,
    };
    let mut resolved = manifest.resolve(kind)?;
    if let Some(out) = &cli.out {
        resolved.output.directory = out.clone();
    }
    if let Some(depth) = &cli.bit_depth {
        resolved.output.bit_depth = depth.parse().expect("validated by clap");
    }
    if let Some(mode) = cli.normalize {
        resolved.output.normalization = mode;
    }

    match &cli.command {
        Command::Design => commands::design(&resolved),
        Command::Project { views } => commands::project(&resolved, views),
        Command::Slice { cloud, combine } => commands::slice(&resolved, cloud, combine.to_rule()),
        Command::Simulate { theta, cloud, sweep } => match (theta.is_empty(), sweep) {
            (false, None) => commands::simulate_views(&resolved, theta, cloud.as_deref()),
            (true, Some(kind)) => commands::simulate_sweep(&resolved, *kind),
            _ => Err(CliError::Validation(
                "simulate needs exactly one of --theta or --sweep".into(),
            )),
        },
        Command::Info => commands::info(&resolved),
    }
}
