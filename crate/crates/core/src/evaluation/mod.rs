//! Overlap metrics, the reset-based and no-reset protocols, sequence I/O
//! and a synthetic sequence generator.

mod synthetic;

use std::borrow::Cow;
use std::fs;
use std::path::{Path, PathBuf};

use image::RgbImage;
use serde::Serialize;

pub use synthetic::{ground_truth_box, make_synthetic_sequence, OcclusionSpec, SyntheticSpec};

use crate::clock::Stopwatch;
use crate::geometry::BBox;
use crate::tracker::{FrameResult, TrackerConfig, TrackerState};
use crate::{Error, Result};

/// Frames skipped after a failure before re-initializing.
pub const BURN_IN: usize = 5;
/// Frames after a re-initialization left out of the accuracy average.
pub const ACCURACY_EXCLUSION: usize = 10;

/// Intersection over union; `0` for invalid boxes.
pub fn overlap(a: &BBox, b: &BBox) -> f64 {
    if !a.is_valid() || !b.is_valid() {
        return 0.0;
    }
    if a == b {
        return 1.0;
    }
    let inter = a.intersection_area(b);
    let union = a.area() + b.area() - inter;
    if union <= 0.0 {
        0.0
    } else {
        (inter / union).clamp(0.0, 1.0)
    }
}

#[derive(Debug, Clone)]
pub enum Frames {
    Memory(Vec<RgbImage>),
    /// Decoded on access.
    Files(Vec<PathBuf>),
}

#[derive(Debug, Clone)]
pub struct Sequence {
    pub name: String,
    pub frames: Frames,
    pub ground_truth: Vec<BBox>,
}

impl Sequence {
    pub fn len(&self) -> usize {
        match &self.frames {
            Frames::Memory(f) => f.len(),
            Frames::Files(f) => f.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn frame(&self, index: usize) -> Result<Cow<'_, RgbImage>> {
        match &self.frames {
            Frames::Memory(f) => f
                .get(index)
                .map(Cow::Borrowed)
                .ok_or_else(|| Error::Data(format!("frame {index} out of range"))),
            Frames::Files(paths) => {
                let path = paths
                    .get(index)
                    .ok_or_else(|| Error::Data(format!("frame {index} out of range")))?;
                let img = image::open(path)
                    .map_err(|e| Error::Data(format!("frame {index} ({}): {e}", path.display())))?;
                Ok(Cow::Owned(img.to_rgb8()))
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.ground_truth.len() != self.len() {
            return Err(Error::Data(format!(
                "sequence '{}' has {} frames but {} ground-truth boxes",
                self.name,
                self.len(),
                self.ground_truth.len()
            )));
        }
        if let Some(i) = self.ground_truth.iter().position(|b| !b.is_valid()) {
            return Err(Error::Data(format!("ground-truth box {i} has no area")));
        }
        Ok(())
    }
}

const IMAGE_EXTENSIONS: [&str; 5] = ["png", "pgm", "ppm", "pnm", "pbm"];

/// Image files in `dir`, sorted by file name.
pub fn list_frames(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.extension()
                .and_then(|e| e.to_str())
                .is_some_and(|e| IMAGE_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()))
        })
        .collect();
    paths.sort();
    Ok(paths)
}

/// Parses one box per non-empty line. Four values are `x,y,w,h`; eight
/// values are a polygon, replaced by its axis-aligned bounds.
pub fn parse_boxes(text: &str) -> Result<Vec<BBox>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, line)| {
            let values: Vec<f64> = line
                .split(|c: char| c == ',' || c.is_whitespace())
                .filter(|s| !s.is_empty())
                .map(|s| s.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Parse(format!("line {}: {e}", i + 1)))?;
            match values.len() {
                8 => {
                    let xs = values.iter().step_by(2);
                    let ys = values.iter().skip(1).step_by(2);
                    let (x0, x1) = xs.fold((f64::MAX, f64::MIN), |(a, b), &v| (a.min(v), b.max(v)));
                    let (y0, y1) = ys.fold((f64::MAX, f64::MIN), |(a, b), &v| (a.min(v), b.max(v)));
                    Ok(BBox::new(x0, y0, x1 - x0, y1 - y0))
                }
                _ => line.parse::<BBox>().map_err(|e| Error::Parse(format!("line {}: {e}", i + 1))),
            }
        })
        .collect()
}

pub fn read_boxes(path: &Path) -> Result<Vec<BBox>> {
    parse_boxes(&fs::read_to_string(path)?)
}

pub fn format_boxes(boxes: &[BBox]) -> String {
    boxes.iter().map(|b| format!("{b}\n")).collect()
}

pub fn write_boxes(path: &Path, boxes: &[BBox]) -> Result<()> {
    fs::write(path, format_boxes(boxes))?;
    Ok(())
}

/// Frames from `dir` with ground truth from `gt`.
pub fn load_sequence(dir: &Path, gt: &Path) -> Result<Sequence> {
    let seq = Sequence {
        name: dir
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| "sequence".into()),
        frames: Frames::Files(list_frames(dir)?),
        ground_truth: read_boxes(gt)?,
    };
    seq.validate()?;
    Ok(seq)
}

/// Anything that can be driven by the evaluation protocols.
pub trait SequenceTracker {
    fn initialize(&mut self, image: &RgbImage, bbox: BBox) -> Result<()>;
    fn track(&mut self, image: &RgbImage) -> Result<BBox>;
}

/// The deformable-parts tracker behind the [`SequenceTracker`] interface.
#[derive(Debug, Clone)]
pub struct DptTracker {
    pub config: TrackerConfig,
    pub state: Option<TrackerState>,
    /// Per-frame diagnostics since the last initialization.
    pub history: Vec<FrameResult>,
}

impl DptTracker {
    pub fn new(config: TrackerConfig) -> Self {
        DptTracker {
            config,
            state: None,
            history: Vec::new(),
        }
    }
}

impl SequenceTracker for DptTracker {
    fn initialize(&mut self, image: &RgbImage, bbox: BBox) -> Result<()> {
        self.state = Some(TrackerState::initialize(image, bbox, self.config.clone())?);
        self.history.clear();
        Ok(())
    }

    fn track(&mut self, image: &RgbImage) -> Result<BBox> {
        let state = self
            .state
            .as_mut()
            .ok_or_else(|| Error::Init("tracker used before initialization".into()))?;
        let result = state.track_frame(image)?;
        let bbox = result.bbox;
        self.history.push(result);
        Ok(bbox)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum FrameStatus {
    Init,
    Tracked,
    Failure,
    Skipped,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Protocol {
    Reset,
    NoReset,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub sequence: String,
    pub protocol: Protocol,
    pub outputs: Vec<Option<BBox>>,
    pub overlaps: Vec<f64>,
    pub status: Vec<FrameStatus>,
    pub failure_count: usize,
    /// Mean overlap over tracked frames outside the post-initialization
    /// exclusion windows; `None` when no frame qualifies.
    pub accuracy: Option<f64>,
    /// Mean overlap over every frame.
    pub average_overlap: f64,
    /// Frames where the tracker returned an error.
    pub tracker_errors: usize,
    pub timings: Vec<f64>,
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

/// Re-initializes from ground truth `BURN_IN` frames after each zero-overlap frame.
pub fn run_reset_based(tracker: &mut dyn SequenceTracker, sequence: &Sequence) -> Result<RunReport> {
    sequence.validate()?;
    let n = sequence.len();
    let mut report = RunReport {
        sequence: sequence.name.clone(),
        protocol: Protocol::Reset,
        outputs: vec![None; n],
        overlaps: vec![0.0; n],
        status: vec![FrameStatus::Skipped; n],
        failure_count: 0,
        accuracy: None,
        average_overlap: 0.0,
        tracker_errors: 0,
        timings: vec![0.0; n],
    };
    let mut counted = vec![false; n];
    let mut frame = 0;
    let mut reinitialized = false;
    while frame < n {
        let gt = sequence.ground_truth[frame];
        let watch = Stopwatch::start();
        tracker.initialize(&*sequence.frame(frame)?, gt)?;
        report.timings[frame] = watch.seconds();
        report.status[frame] = FrameStatus::Init;
        report.outputs[frame] = Some(gt);
        report.overlaps[frame] = 1.0;
        let exclusion_end = if reinitialized { frame + ACCURACY_EXCLUSION } else { frame };
        let mut next = frame + 1;
        let mut failed = false;
        while next < n {
            let image = sequence.frame(next)?;
            let watch = Stopwatch::start();
            let out = tracker.track(&image);
            report.timings[next] = watch.seconds();
            let ov = match out {
                Ok(b) => {
                    report.outputs[next] = Some(b);
                    overlap(&b, &sequence.ground_truth[next])
                }
                Err(_) => {
                    report.tracker_errors += 1;
                    0.0
                }
            };
            report.overlaps[next] = ov;
            if ov <= 0.0 {
                report.status[next] = FrameStatus::Failure;
                report.failure_count += 1;
                failed = true;
                break;
            }
            report.status[next] = FrameStatus::Tracked;
            counted[next] = next > exclusion_end;
            next += 1;
        }
        if !failed {
            break;
        }
        frame = next + BURN_IN;
        reinitialized = true;
    }
    report.accuracy = mean(report.overlaps.iter().zip(&counted).filter(|(_, &c)| c).map(|(&o, _)| o));
    report.average_overlap = mean(report.overlaps.iter().cloned()).unwrap_or(0.0);
    Ok(report)
}

/// Single initialization; an erroring frame repeats the previous output.
pub fn run_no_reset(tracker: &mut dyn SequenceTracker, sequence: &Sequence) -> Result<RunReport> {
    sequence.validate()?;
    let n = sequence.len();
    let mut report = RunReport {
        sequence: sequence.name.clone(),
        protocol: Protocol::NoReset,
        outputs: Vec::with_capacity(n),
        overlaps: Vec::with_capacity(n),
        status: Vec::with_capacity(n),
        failure_count: 0,
        accuracy: None,
        average_overlap: 0.0,
        tracker_errors: 0,
        timings: Vec::with_capacity(n),
    };
    if n == 0 {
        return Ok(report);
    }
    let watch = Stopwatch::start();
    tracker.initialize(&*sequence.frame(0)?, sequence.ground_truth[0])?;
    report.timings.push(watch.seconds());
    let mut last = sequence.ground_truth[0];
    report.outputs.push(Some(last));
    report.overlaps.push(1.0);
    report.status.push(FrameStatus::Init);
    for i in 1..n {
        let image = sequence.frame(i)?;
        let watch = Stopwatch::start();
        match tracker.track(&image) {
            Ok(b) => last = b,
            Err(_) => report.tracker_errors += 1,
        }
        report.timings.push(watch.seconds());
        let ov = overlap(&last, &sequence.ground_truth[i]);
        report.outputs.push(Some(last));
        report.overlaps.push(ov);
        report.status.push(if ov > 0.0 { FrameStatus::Tracked } else { FrameStatus::Failure });
    }
    report.failure_count = report.status.iter().filter(|s| **s == FrameStatus::Failure).count();
    report.average_overlap = mean(report.overlaps.iter().cloned()).unwrap_or(0.0);
    report.accuracy = mean(
        report
            .overlaps
            .iter()
            .zip(&report.status)
            .filter(|(_, s)| **s == FrameStatus::Tracked)
            .map(|(&o, _)| o),
    );
    Ok(report)
}

/// Scores precomputed outputs against ground truth without re-running a tracker.
pub fn score_outputs(name: &str, outputs: &[BBox], ground_truth: &[BBox]) -> Result<RunReport> {
    if outputs.len() != ground_truth.len() {
        return Err(Error::Data(format!(
            "{} output boxes but {} ground-truth boxes",
            outputs.len(),
            ground_truth.len()
        )));
    }
    let overlaps: Vec<f64> = outputs.iter().zip(ground_truth).map(|(a, b)| overlap(a, b)).collect();
    let status: Vec<FrameStatus> = overlaps
        .iter()
        .map(|&o| if o > 0.0 { FrameStatus::Tracked } else { FrameStatus::Failure })
        .collect();
    Ok(RunReport {
        sequence: name.to_string(),
        protocol: Protocol::NoReset,
        outputs: outputs.iter().map(|&b| Some(b)).collect(),
        failure_count: status.iter().filter(|s| **s == FrameStatus::Failure).count(),
        accuracy: mean(
            overlaps
                .iter()
                .zip(&status)
                .filter(|(_, s)| **s == FrameStatus::Tracked)
                .map(|(&o, _)| o),
        ),
        average_overlap: mean(overlaps.iter().cloned()).unwrap_or(0.0),
        overlaps,
        status,
        tracker_errors: 0,
        timings: vec![0.0; outputs.len()],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use image::Rgb;

    struct Oracle {
        boxes: Vec<BBox>,
        frame: usize,
    }

    impl SequenceTracker for Oracle {
        fn initialize(&mut self, image: &RgbImage, _bbox: BBox) -> Result<()> {
            self.frame = image.get_pixel(0, 0).0[0] as usize;
            Ok(())
        }
        fn track(&mut self, image: &RgbImage) -> Result<BBox> {
            self.frame = image.get_pixel(0, 0).0[0] as usize;
            Ok(self.boxes[self.frame])
        }
    }

    struct Fixed(BBox);

    impl SequenceTracker for Fixed {
        fn initialize(&mut self, _: &RgbImage, _: BBox) -> Result<()> {
            Ok(())
        }
        fn track(&mut self, _: &RgbImage) -> Result<BBox> {
            Ok(self.0)
        }
    }

    /// Frames carry their index in the first pixel so trackers can look up truth.
    fn indexed_sequence(n: usize) -> Sequence {
        let frames = (0..n).map(|i| RgbImage::from_pixel(4, 4, Rgb([i as u8, 0, 0]))).collect();
        let ground_truth = (0..n).map(|i| BBox::new(i as f64, 10.0, 20.0, 20.0)).collect();
        Sequence {
            name: "indexed".into(),
            frames: Frames::Memory(frames),
            ground_truth,
        }
    }

    #[test]
    fn overlap_cases() {
        let a = BBox::new(0.0, 0.0, 10.0, 10.0);
        assert_eq!(overlap(&a, &a), 1.0);
        assert_eq!(overlap(&a, &BBox::new(20.0, 0.0, 5.0, 5.0)), 0.0);
        let shifted = BBox::new(5.0, 0.0, 10.0, 10.0);
        assert!((overlap(&a, &shifted) - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(overlap(&a, &shifted), overlap(&shifted, &a));
    }

    #[test]
    fn oracle_is_perfect() {
        let seq = indexed_sequence(30);
        let mut oracle = Oracle {
            boxes: seq.ground_truth.clone(),
            frame: 0,
        };
        let r = run_reset_based(&mut oracle, &seq).unwrap();
        assert_eq!(r.failure_count, 0);
        assert_eq!(r.accuracy, Some(1.0));
        let r = run_no_reset(&mut oracle, &seq).unwrap();
        assert_eq!(r.average_overlap, 1.0);
    }

    #[test]
    fn fixed_off_target_fails_every_window() {
        let n = 40;
        let seq = indexed_sequence(n);
        let mut t = Fixed(BBox::new(500.0, 500.0, 5.0, 5.0));
        let r = run_reset_based(&mut t, &seq).unwrap();
        // init at 0, fail at 1, init at 6, fail at 7, ...
        let window = BURN_IN + 1;
        let expected = (0..n).step_by(window).filter(|&i| i + 1 < n).count();
        assert_eq!(r.failure_count, expected);
        assert_eq!(r.status[1], FrameStatus::Failure);
        assert_eq!(r.status[1 + BURN_IN], FrameStatus::Init);
        assert_eq!(r.accuracy, None);
    }

    #[test]
    fn losing_target_halfway_halves_ao() {
        let n = 20;
        let seq = indexed_sequence(n);
        struct Lose(Vec<BBox>, usize);
        impl SequenceTracker for Lose {
            fn initialize(&mut self, _: &RgbImage, _: BBox) -> Result<()> {
                Ok(())
            }
            fn track(&mut self, image: &RgbImage) -> Result<BBox> {
                let i = image.get_pixel(0, 0).0[0] as usize;
                Ok(if i < self.1 { self.0[i] } else { BBox::new(900.0, 900.0, 1.0, 1.0) })
            }
        }
        let mut t = Lose(seq.ground_truth.clone(), n / 2);
        let r = run_no_reset(&mut t, &seq).unwrap();
        assert!((r.average_overlap - 0.5).abs() < 1e-12);
    }

    #[test]
    fn parse_and_format_boxes() {
        let boxes = parse_boxes("1,2,3,4\n\n5\t6\t7\t8\n0,0,10,0,10,5,0,5\n").unwrap();
        assert_eq!(boxes[0], BBox::new(1.0, 2.0, 3.0, 4.0));
        assert_eq!(boxes[1], BBox::new(5.0, 6.0, 7.0, 8.0));
        assert_eq!(boxes[2], BBox::new(0.0, 0.0, 10.0, 5.0));
        assert_eq!(parse_boxes(&format_boxes(&boxes)).unwrap(), boxes);
        assert!(parse_boxes("1,2,3").is_err());
    }

    #[test]
    fn score_outputs_checks_lengths() {
        let gt = vec![BBox::new(0.0, 0.0, 10.0, 10.0); 3];
        assert!(score_outputs("x", &gt[..2], &gt).is_err());
        let shifted: Vec<_> = gt.iter().map(|b| b.translated(crate::Vec2::new(5.0, 0.0))).collect();
        let r = score_outputs("x", &shifted, &gt).unwrap();
        assert!((r.average_overlap - 1.0 / 3.0).abs() < 1e-12);
    }
}
