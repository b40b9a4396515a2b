mod bench;
mod dump;
mod error;
mod eval;
mod synth;
mod track;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use dpt_core::tracker::{PartLayout, Topology, TrackerConfig, TrackerMode};
use dpt_core::BBox;

use crate::error::{CliError, CliResult};

/// Seed used when `--seed` is not given.
pub const DEFAULT_SEED: u64 = 1;

#[derive(Debug, Parser)]
#[command(name = "dpt", version, about = "Deformable-parts correlation filter tracker")]
struct Cli {
    /// Print progress to stderr.
    #[arg(short, long, global = true)]
    verbose: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Track an object through a directory of frames.
    Track(track::TrackArgs),
    /// Compare the spring-system solvers on random systems.
    BenchSprings(bench::BenchArgs),
    /// Score tracker output against ground truth.
    Eval(eval::EvalArgs),
    /// Render a synthetic sequence with exact ground truth.
    MakeSynthetic(synth::SynthArgs),
}

/// Tracker options shared by `track` and `eval`.
#[derive(Debug, Clone, clap::Args)]
pub struct TrackerOpts {
    /// Tracker configuration (TOML).
    #[arg(long)]
    config: Option<PathBuf>,

    /// Link topology of the part constellation.
    #[arg(long, value_parser = parse_text::<Topology>)]
    topology: Option<Topology>,

    /// Part layout: 2x2, 3x3 or 3x3ov.
    #[arg(long, value_parser = parse_text::<PartLayout>)]
    parts: Option<PartLayout>,

    /// full, coarse-only or coarse-no-color.
    #[arg(long, value_parser = parse_text::<TrackerMode>)]
    mode: Option<TrackerMode>,
}

impl TrackerOpts {
    pub fn load(&self) -> CliResult<TrackerConfig> {
        let mut config = match &self.config {
            Some(path) => {
                let text = fs::read_to_string(path).map_err(CliError::io(path))?;
                TrackerConfig::from_toml(&text).map_err(|e| CliError::Config {
                    path: path.clone(),
                    message: e.to_string(),
                })?
            }
            None => TrackerConfig::default(),
        };
        if let Some(t) = self.topology {
            config.topology = t;
        }
        if let Some(p) = self.parts {
            config.parts = p;
        }
        if let Some(m) = self.mode {
            config.mode = m;
        }
        config.validate()?;
        Ok(config)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ProtocolArg {
    Reset,
    Noreset,
}

fn parse_text<T: std::str::FromStr>(s: &str) -> Result<T, String>
where
    T::Err: std::fmt::Display,
{
    s.parse::<T>().map_err(|e| e.to_string())
}

pub fn parse_box(s: &str) -> Result<BBox, String> {
    let b: BBox = s.parse().map_err(|e: dpt_core::Error| e.to_string())?;
    if b.is_valid() {
        Ok(b)
    } else {
        Err(format!("box {b} has no area"))
    }
}

/// One spring-system size; at least two dynamic nodes.
pub fn parse_size(s: &str) -> Result<usize, String> {
    let n: usize = s.trim().parse().map_err(|e| format!("'{s}': {e}"))?;
    if n < 2 {
        Err(format!("size {n} is below the minimum of 2 nodes"))
    } else {
        Ok(n)
    }
}

pub fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> CliResult<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(CliError::io(parent))?;
    }
    fs::write(path, contents).map_err(CliError::io(path))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Track(args) => track::run(&args, cli.verbose),
        Command::BenchSprings(args) => bench::run(&args, cli.verbose),
        Command::Eval(args) => eval::run(&args, cli.verbose),
        Command::MakeSynthetic(args) => synth::run(&args, cli.verbose),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
