use std::path::PathBuf;

use dpt_core::evaluation::{
    list_frames, read_boxes, run_no_reset, run_reset_based, score_outputs, DptTracker, FrameStatus, Frames,
    Protocol, RunReport, Sequence,
};
use dpt_core::BBox;
use serde::Serialize;

use crate::error::{CliError, CliResult};
use crate::{write_file, ProtocolArg, TrackerOpts};

#[derive(Debug, clap::Args)]
pub struct EvalArgs {
    /// Ground-truth boxes, one "x,y,w,h" line per frame.
    #[arg(long)]
    gt: PathBuf,

    /// Tracker output to score (no-reset protocol only).
    #[arg(long)]
    boxes: Option<PathBuf>,

    /// Frames to track live; required by the reset protocol.
    #[arg(long)]
    frames: Option<PathBuf>,

    #[arg(long, value_enum, default_value_t = ProtocolArg::Noreset)]
    protocol: ProtocolArg,

    /// JSON report with per-frame overlaps and a summary block.
    #[arg(long)]
    out: Option<PathBuf>,

    /// Per-frame CSV (frame, overlap, status).
    #[arg(long)]
    csv: Option<PathBuf>,

    #[command(flatten)]
    tracker: TrackerOpts,
}

#[derive(Debug, Serialize)]
pub struct Summary {
    pub sequence: String,
    pub protocol: Protocol,
    pub frames: usize,
    pub failures: usize,
    pub accuracy: Option<f64>,
    pub average_overlap: f64,
    pub tracker_errors: usize,
}

#[derive(Debug, Serialize)]
pub struct FrameRecord {
    pub frame: usize,
    pub overlap: f64,
    pub status: FrameStatus,
    pub output: Option<BBox>,
}

#[derive(Debug, Serialize)]
pub struct EvalReport {
    pub summary: Summary,
    pub frames: Vec<FrameRecord>,
}

impl From<&RunReport> for EvalReport {
    fn from(r: &RunReport) -> Self {
        EvalReport {
            summary: Summary {
                sequence: r.sequence.clone(),
                protocol: r.protocol,
                frames: r.overlaps.len(),
                failures: r.failure_count,
                accuracy: r.accuracy,
                average_overlap: r.average_overlap,
                tracker_errors: r.tracker_errors,
            },
            frames: r
                .overlaps
                .iter()
                .zip(&r.status)
                .zip(&r.outputs)
                .enumerate()
                .map(|(frame, ((&overlap, &status), &output))| FrameRecord {
                    frame,
                    overlap,
                    status,
                    output,
                })
                .collect(),
        }
    }
}

fn status_name(s: FrameStatus) -> &'static str {
    match s {
        FrameStatus::Init => "init",
        FrameStatus::Tracked => "tracked",
        FrameStatus::Failure => "failure",
        FrameStatus::Skipped => "skipped",
    }
}

pub fn evaluate(args: &EvalArgs) -> CliResult<RunReport> {
    let gt_error = |e: dpt_core::Error| CliError::Config {
        path: args.gt.clone(),
        message: e.to_string(),
    };
    let ground_truth = read_boxes(&args.gt).map_err(gt_error)?;
    let name = args
        .frames
        .as_ref()
        .unwrap_or(&args.gt)
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "sequence".into());

    if let Some(boxes) = &args.boxes {
        if args.protocol == ProtocolArg::Reset {
            return Err(CliError::Usage(
                "the reset protocol re-runs the tracker; pass --frames instead of --boxes".into(),
            ));
        }
        let outputs = read_boxes(boxes).map_err(|e| CliError::Config {
            path: boxes.clone(),
            message: e.to_string(),
        })?;
        return Ok(score_outputs(&name, &outputs, &ground_truth)?);
    }

    let Some(dir) = &args.frames else {
        return Err(CliError::Usage("pass --boxes to score a tracker output or --frames to track live".into()));
    };
    let frames = list_frames(dir).map_err(|e| CliError::Config {
        path: dir.clone(),
        message: e.to_string(),
    })?;
    let sequence = Sequence {
        name,
        frames: Frames::Files(frames),
        ground_truth,
    };
    let mut tracker = DptTracker::new(args.tracker.load()?);
    let report = match args.protocol {
        ProtocolArg::Reset => run_reset_based(&mut tracker, &sequence)?,
        ProtocolArg::Noreset => run_no_reset(&mut tracker, &sequence)?,
    };
    Ok(report)
}

pub fn summary_line(r: &RunReport) -> String {
    let accuracy = r.accuracy.map_or_else(|| "n/a".to_string(), |a| format!("{a:.4}"));
    format!(
        "{}: {} frames, failures {}, accuracy {accuracy}, average overlap {:.4}, tracker errors {}",
        r.sequence,
        r.overlaps.len(),
        r.failure_count,
        r.average_overlap,
        r.tracker_errors
    )
}

pub fn run(args: &EvalArgs, verbose: bool) -> CliResult<()> {
    let report = evaluate(args)?;
    if verbose {
        for (i, (o, s)) in report.overlaps.iter().zip(&report.status).enumerate() {
            eprintln!("frame {i}: overlap {o:.4} {}", status_name(*s));
        }
    }
    println!("{}", summary_line(&report));
    if let Some(path) = &args.out {
        write_file(path, serde_json::to_string_pretty(&EvalReport::from(&report))?)?;
    }
    if let Some(path) = &args.csv {
        let mut csv = String::from("frame,overlap,status\n");
        for (i, (o, s)) in report.overlaps.iter().zip(&report.status).enumerate() {
            csv.push_str(&format!("{i},{o:.6},{}\n", status_name(*s)));
        }
        write_file(path, csv)?;
    }
    Ok(())
}
