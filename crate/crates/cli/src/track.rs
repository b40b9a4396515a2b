use std::path::{Path, PathBuf};

use dpt_core::evaluation::{format_boxes, list_frames, read_boxes};
use dpt_core::tracker::{FrameResult, TrackerState};
use dpt_core::BBox;
use image::RgbImage;

use crate::error::{CliError, CliResult};
use crate::{dump, parse_box, write_file, TrackerOpts};

#[derive(Debug, clap::Args)]
pub struct TrackArgs {
    /// Directory of frames, processed in file-name order.
    #[arg(long)]
    frames: PathBuf,

    /// Initial box "x,y,w,h"; defaults to the first ground-truth line.
    #[arg(long, value_parser = parse_box)]
    init: Option<BBox>,

    /// Ground-truth file, used only for the initial box.
    #[arg(long)]
    gt: Option<PathBuf>,

    /// Output boxes, one "x,y,w,h" line per frame.
    #[arg(long)]
    out: PathBuf,

    /// Per-frame diagnostics (part weights, alpha_col, energies) as JSON.
    #[arg(long)]
    diagnostics: Option<PathBuf>,

    /// Write response maps, segmentation and annotated frames here.
    #[arg(long)]
    dump_debug: Option<PathBuf>,

    #[command(flatten)]
    tracker: TrackerOpts,
}

pub fn load_frame(index: usize, path: &Path) -> CliResult<RgbImage> {
    image::open(path)
        .map(|img| img.to_rgb8())
        .map_err(|e| CliError::Frame {
            index,
            path: path.to_path_buf(),
            source: e.into(),
        })
}

fn initial_box(args: &TrackArgs) -> CliResult<BBox> {
    if let Some(b) = args.init {
        return Ok(b);
    }
    let Some(gt) = &args.gt else {
        return Err(CliError::Usage("no initial box: pass --init or --gt".into()));
    };
    let boxes = read_boxes(gt).map_err(|e| CliError::Config {
        path: gt.clone(),
        message: e.to_string(),
    })?;
    let first = boxes
        .first()
        .copied()
        .ok_or_else(|| CliError::Usage(format!("{} holds no boxes", gt.display())))?;
    if !first.is_valid() {
        return Err(CliError::Usage(format!("initial box {first} has no area")));
    }
    Ok(first)
}

/// Runs the tracker over `paths`; the first output is `init`.
pub fn track_frames(
    paths: &[PathBuf],
    init: BBox,
    opts: &TrackerOpts,
    dump_dir: Option<&Path>,
    verbose: bool,
) -> CliResult<(Vec<BBox>, Vec<FrameResult>)> {
    let config = opts.load()?;
    let first = load_frame(0, &paths[0])?;
    let mut state = TrackerState::initialize(&first, init, config).map_err(|source| CliError::Frame {
        index: 0,
        path: paths[0].clone(),
        source,
    })?;
    if let Some(dir) = dump_dir {
        dump::write_overlay(dir, 0, &first, &state, None)?;
    }
    let mut boxes = vec![init];
    let mut results = Vec::with_capacity(paths.len().saturating_sub(1));
    for (index, path) in paths.iter().enumerate().skip(1) {
        let frame = load_frame(index, path)?;
        let outcome = match dump_dir {
            Some(dir) => state.track_frame_debug(&frame).and_then(|(result, debug)| {
                dump::write_frame(dir, index, &frame, &state, &result, &debug)
                    .map_err(|e| dpt_core::Error::Data(e.to_string()))?;
                Ok(result)
            }),
            None => state.track_frame(&frame),
        };
        let result = outcome.map_err(|source| CliError::Frame {
            index,
            path: path.clone(),
            source,
        })?;
        if verbose {
            eprintln!(
                "frame {index}: {} alpha_col {} energy {:.4} -> {:.4}",
                result.bbox, result.alpha_col, result.initial_energy, result.final_energy
            );
        }
        boxes.push(result.bbox);
        results.push(result);
    }
    Ok((boxes, results))
}

pub fn run(args: &TrackArgs, verbose: bool) -> CliResult<()> {
    let paths = list_frames(&args.frames).map_err(|e| CliError::Config {
        path: args.frames.clone(),
        message: e.to_string(),
    })?;
    if paths.is_empty() {
        return Err(CliError::Usage(format!("no frames found in {}", args.frames.display())));
    }
    let init = initial_box(args)?;
    let (boxes, results) = track_frames(&paths, init, &args.tracker, args.dump_debug.as_deref(), verbose)?;
    write_file(&args.out, format_boxes(&boxes))?;
    if let Some(path) = &args.diagnostics {
        write_file(path, serde_json::to_string_pretty(&results)?)?;
    }
    if verbose {
        eprintln!("tracked {} frames, boxes written to {}", boxes.len(), args.out.display());
    }
    Ok(())
}
