//! WebAssembly bindings for an interactive page: solve random spring
//! systems with both optimizers, probe a correlation filter with shifted
//! inputs, and step the tracker through a synthetic sequence.
//!
//! The exported types are plain Rust as well, so everything here also runs
//! natively.

use dpt_core::correlation_filter::{argmax, extract_features, refine_peak, Filter};
use dpt_core::evaluation::{make_synthetic_sequence, overlap, OcclusionSpec, Sequence, SyntheticSpec};
use dpt_core::imaging::center_shift;
use dpt_core::spring_system::{generate_random_system, solve_cgd, solve_ida, CgdOptions, IdaOptions};
use dpt_core::tracker::{FrameResult, TrackerConfig, TrackerMode, TrackerState};
use dpt_core::{BBox, Vec2};
use image::RgbImage;
use wasm_bindgen::prelude::*;

fn js_error(e: dpt_core::Error) -> JsError {
    JsError::new(&e.to_string())
}

fn flatten(points: &[Vec2]) -> Vec<f64> {
    points.iter().flat_map(|p| [p.x, p.y]).collect()
}

fn box_values(b: &BBox) -> Vec<f64> {
    vec![b.x, b.y, b.width, b.height]
}

fn rgba(image: &RgbImage) -> Vec<u8> {
    image.pixels().flat_map(|p| [p.0[0], p.0[1], p.0[2], 255]).collect()
}

/// Both optimizers run on the same random spring system.
#[wasm_bindgen]
#[derive(Debug, Clone)]
pub struct SpringSolve {
    nodes: Vec<f64>,
    anchors: Vec<f64>,
    ida_positions: Vec<f64>,
    cgd_positions: Vec<f64>,
    ida_trace: Vec<f64>,
    cgd_trace: Vec<f64>,
    links: Vec<u32>,
}

#[wasm_bindgen]
impl SpringSolve {
    /// Initial dynamic node positions, `[x0, y0, x1, y1, ...]`.
    pub fn nodes(&self) -> Vec<f64> {
        self.nodes.clone()
    }

    pub fn anchors(&self) -> Vec<f64> {
        self.anchors.clone()
    }

    pub fn ida_positions(&self) -> Vec<f64> {
        self.ida_positions.clone()
    }

    pub fn cgd_positions(&self) -> Vec<f64> {
        self.cgd_positions.clone()
    }

    /// Energy before the first iteration and after each one.
    pub fn ida_trace(&self) -> Vec<f64> {
        self.ida_trace.clone()
    }

    pub fn cgd_trace(&self) -> Vec<f64> {
        self.cgd_trace.clone()
    }

    /// Node index pairs of the dynamic springs, flattened.
    pub fn links(&self) -> Vec<u32> {
        self.links.clone()
    }
}

pub fn spring_solve(size: usize, seed: u64, tol: f64) -> dpt_core::Result<SpringSolve> {
    let system = generate_random_system(size, seed)?;
    let ida = solve_ida(&system, IdaOptions { tol, ..IdaOptions::default() })?;
    let cgd = solve_cgd(&system, CgdOptions { tol, ..CgdOptions::default() })?;
    Ok(SpringSolve {
        nodes: flatten(system.nodes()),
        anchors: flatten(system.anchors()),
        ida_positions: flatten(&ida.final_positions),
        cgd_positions: flatten(&cgd.final_positions),
        ida_trace: ida.energy_trace,
        cgd_trace: cgd.energy_trace,
        links: system
            .dynamic_springs()
            .iter()
            .flat_map(|s| [s.a as u32, s.b as u32])
            .collect(),
    })
}

#[wasm_bindgen]
pub fn solve_springs(size: usize, seed: u32, tol: f64) -> Result<SpringSolve, JsError> {
    spring_solve(size, seed as u64, tol).map_err(js_error)
}

/// Response of a filter trained on a synthetic target, shown in display
/// order (zero shift at the center).
#[wasm_bindgen]
#[derive(Debug, Clone)]
pub struct ResponseMap {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
    peak_dx: f64,
    peak_dy: f64,
    image: Vec<u8>,
}

#[wasm_bindgen]
impl ResponseMap {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn values(&self) -> Vec<f64> {
        self.values.clone()
    }

    /// Estimated target displacement in pixels.
    pub fn peak_dx(&self) -> f64 {
        self.peak_dx
    }

    pub fn peak_dy(&self) -> f64 {
        self.peak_dy
    }

    /// RGBA pixels of the shifted frame.
    pub fn image(&self) -> Vec<u8> {
        self.image.clone()
    }
}

/// A filter trained once on the first frame of a synthetic sequence,
/// probed with translated copies of that frame.
#[wasm_bindgen]
#[derive(Debug, Clone)]
pub struct ResponseExplorer {
    frame: RgbImage,
    target: BBox,
    window: (f64, f64),
    cell_size: usize,
    filter: Filter,
}

impl ResponseExplorer {
    pub fn create(seed: u64) -> dpt_core::Result<ResponseExplorer> {
        let spec = SyntheticSpec {
            frames: 1,
            ..SyntheticSpec::default()
        };
        let frame = make_synthetic_sequence(&spec, seed)?.frame(0)?.into_owned();
        let config = TrackerConfig::default();
        let target = spec.init;
        let window = (target.width * config.padding, target.height * config.padding);
        let patch = extract_features(&frame, target.center(), window, config.cell_size, true)?;
        let filter = Filter::fit(&patch, (target.width, target.height), &config.filter_params())?;
        Ok(ResponseExplorer {
            frame,
            target,
            window,
            cell_size: config.cell_size,
            filter,
        })
    }

    pub fn probe(&self, dx: i32, dy: i32) -> dpt_core::Result<ResponseMap> {
        let (w, h) = self.frame.dimensions();
        let shifted = RgbImage::from_fn(w, h, |x, y| {
            let sx = (x as i64 - dx as i64).clamp(0, w as i64 - 1) as u32;
            let sy = (y as i64 - dy as i64).clamp(0, h as i64 - 1) as u32;
            *self.frame.get_pixel(sx, sy)
        });
        let patch = extract_features(&shifted, self.target.center(), self.window, self.cell_size, true)?;
        let response = self.filter.respond(&patch)?;
        let (rows, cols) = response.dim();
        let (fy, fx) = refine_peak(&response, argmax(&response));
        let cell = self.cell_size as f64;
        Ok(ResponseMap {
            rows,
            cols,
            values: center_shift(&response).iter().copied().collect(),
            peak_dx: fx * cell,
            peak_dy: fy * cell,
            image: rgba(&shifted),
        })
    }
}

#[wasm_bindgen]
impl ResponseExplorer {
    #[wasm_bindgen(constructor)]
    pub fn new(seed: u32) -> Result<ResponseExplorer, JsError> {
        ResponseExplorer::create(seed as u64).map_err(js_error)
    }

    pub fn width(&self) -> u32 {
        self.frame.width()
    }

    pub fn height(&self) -> u32 {
        self.frame.height()
    }

    /// Target box `[x, y, w, h]` the filter was trained on.
    pub fn target(&self) -> Vec<f64> {
        box_values(&self.target)
    }

    /// Response after translating the whole frame by `(dx, dy)` pixels.
    pub fn respond(&self, dx: i32, dy: i32) -> Result<ResponseMap, JsError> {
        self.probe(dx, dy).map_err(js_error)
    }
}

/// The tracker stepping through a synthetic sequence one frame at a time.
#[wasm_bindgen]
#[derive(Debug, Clone)]
pub struct TrackingDemo {
    sequence: Sequence,
    state: TrackerState,
    index: usize,
    bbox: BBox,
    last: Option<FrameResult>,
    overlap_sum: f64,
}

impl TrackingDemo {
    pub fn create(seed: u64, deformation: f64, occlusion: bool, mode: &str) -> dpt_core::Result<TrackingDemo> {
        let mode: TrackerMode = mode.parse()?;
        let spec = SyntheticSpec {
            deformation,
            occlusion: occlusion.then_some(OcclusionSpec {
                start: 40,
                end: 60,
                fraction: 0.5,
            }),
            ..SyntheticSpec::default()
        };
        let sequence = make_synthetic_sequence(&spec, seed)?;
        let init = sequence.ground_truth[0];
        let config = TrackerConfig {
            mode,
            ..TrackerConfig::default()
        };
        let state = TrackerState::initialize(&*sequence.frame(0)?, init, config)?;
        Ok(TrackingDemo {
            sequence,
            state,
            index: 0,
            bbox: init,
            last: None,
            overlap_sum: 1.0,
        })
    }

    /// Tracks the next frame. A frame the tracker rejects keeps the previous
    /// box. Returns `false` once the sequence is exhausted.
    pub fn advance(&mut self) -> dpt_core::Result<bool> {
        if self.index + 1 >= self.sequence.len() {
            return Ok(false);
        }
        self.index += 1;
        let frame = self.sequence.frame(self.index)?;
        self.last = self.state.track_frame(&frame).ok();
        if let Some(r) = &self.last {
            self.bbox = r.bbox;
        }
        self.overlap_sum += overlap(&self.bbox, &self.sequence.ground_truth[self.index]);
        Ok(true)
    }
}

#[wasm_bindgen]
impl TrackingDemo {
    /// `mode` is `full`, `coarse-only` or `coarse-no-color`.
    #[wasm_bindgen(constructor)]
    pub fn new(seed: u32, deformation: f64, occlusion: bool, mode: &str) -> Result<TrackingDemo, JsError> {
        TrackingDemo::create(seed as u64, deformation, occlusion, mode).map_err(js_error)
    }

    pub fn step(&mut self) -> Result<bool, JsError> {
        self.advance().map_err(js_error)
    }

    pub fn frame_count(&self) -> usize {
        self.sequence.len()
    }

    pub fn index(&self) -> usize {
        self.index
    }

    pub fn width(&self) -> u32 {
        self.state_frame_size().0
    }

    pub fn height(&self) -> u32 {
        self.state_frame_size().1
    }

    /// RGBA pixels of the current frame.
    pub fn frame(&self) -> Result<Vec<u8>, JsError> {
        let image = self.sequence.frame(self.index).map_err(js_error)?;
        Ok(rgba(&image))
    }

    pub fn bbox(&self) -> Vec<f64> {
        box_values(&self.bbox)
    }

    pub fn ground_truth(&self) -> Vec<f64> {
        box_values(&self.sequence.ground_truth[self.index])
    }

    /// `[x, y, w, h, updated]` per part for the current frame.
    pub fn parts(&self) -> Vec<f64> {
        self.state
            .constellation
            .parts
            .iter()
            .enumerate()
            .flat_map(|(i, part)| {
                let (position, updated) = self
                    .last
                    .as_ref()
                    .map_or((part.position, true), |r| (r.part_positions[i], r.updated_parts[i]));
                let region = BBox::from_center(position, part.size.0, part.size.1);
                [region.x, region.y, region.width, region.height, updated as u8 as f64]
            })
            .collect()
    }

    /// Mean overlap with the ground truth over the frames seen so far.
    pub fn average_overlap(&self) -> f64 {
        self.overlap_sum / (self.index + 1) as f64
    }

    /// Color weight of the current frame; 1 means the color cue was ignored.
    pub fn alpha_col(&self) -> f64 {
        self.last.as_ref().map_or(1.0, |r| r.alpha_col)
    }
}

impl TrackingDemo {
    fn state_frame_size(&self) -> (u32, u32) {
        self.sequence
            .frame(self.index)
            .map(|f| f.dimensions())
            .unwrap_or((0, 0))
    }
}
