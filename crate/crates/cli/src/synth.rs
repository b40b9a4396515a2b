use std::fs;
use std::path::PathBuf;

use dpt_core::evaluation::{format_boxes, make_synthetic_sequence, OcclusionSpec, SyntheticSpec};

use crate::error::{CliError, CliResult};
use crate::{write_file, DEFAULT_SEED};

/// File holding the ground truth inside a generated sequence directory.
pub const GROUND_TRUTH_FILE: &str = "groundtruth.txt";

#[derive(Debug, clap::Args)]
pub struct SynthArgs {
    /// Output directory for the frames and `groundtruth.txt`.
    #[arg(long)]
    out: PathBuf,

    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,

    /// Sequence description (TOML); unspecified fields keep their defaults.
    #[arg(long)]
    config: Option<PathBuf>,

    /// Number of frames.
    #[arg(long)]
    length: Option<usize>,

    /// Amplitude in pixels of independent quadrant motion.
    #[arg(long)]
    deformation: Option<f64>,

    /// Occlude the lower part of the target: "start,end,fraction" (frames inclusive).
    #[arg(long, value_parser = parse_occlusion)]
    occlusion: Option<OcclusionSpec>,
}

fn parse_occlusion(s: &str) -> Result<OcclusionSpec, String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let [start, end, fraction] = parts[..] else {
        return Err(format!("expected start,end,fraction, got '{s}'"));
    };
    let start: usize = start.parse().map_err(|e| format!("start '{start}': {e}"))?;
    let end: usize = end.parse().map_err(|e| format!("end '{end}': {e}"))?;
    let fraction: f64 = fraction.parse().map_err(|e| format!("fraction '{fraction}': {e}"))?;
    if end < start || !(0.0..=1.0).contains(&fraction) {
        return Err(format!("need start <= end and fraction in [0, 1], got '{s}'"));
    }
    Ok(OcclusionSpec { start, end, fraction })
}

pub fn spec_from_args(args: &SynthArgs) -> CliResult<SyntheticSpec> {
    let mut spec = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(CliError::io(path))?;
            toml::from_str(&text).map_err(|e| CliError::Config {
                path: path.clone(),
                message: e.to_string(),
            })?
        }
        None => SyntheticSpec::default(),
    };
    if let Some(n) = args.length {
        spec.frames = n;
    }
    if let Some(d) = args.deformation {
        spec.deformation = d;
    }
    if let Some(o) = args.occlusion {
        spec.occlusion = Some(o);
    }
    Ok(spec)
}

pub fn run(args: &SynthArgs, verbose: bool) -> CliResult<()> {
    let spec = spec_from_args(args)?;
    let sequence = make_synthetic_sequence(&spec, args.seed)?;
    fs::create_dir_all(&args.out).map_err(CliError::io(&args.out))?;
    for i in 0..sequence.len() {
        let path = args.out.join(format!("{i:05}.png"));
        sequence.frame(i)?.save(&path).map_err(|e| CliError::Frame {
            index: i,
            path,
            source: e.into(),
        })?;
    }
    write_file(&args.out.join(GROUND_TRUTH_FILE), format_boxes(&sequence.ground_truth))?;
    if verbose {
        eprintln!("wrote {} frames to {}", sequence.len(), args.out.display());
    }
    Ok(())
}
