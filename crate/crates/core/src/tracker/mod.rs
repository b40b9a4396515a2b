//! The two-layer tracker: a coarse root filter and color model give an
//! approximate translation, then a constellation of part filters joined by
//! springs is solved for its MAP configuration, which refines the box.

mod config;
mod constellation;
mod transform;

use image::RgbImage;
use ndarray::Array2;
use serde::Serialize;

pub use config::{PartLayout, Topology, TrackerConfig, TrackerMode};
pub use constellation::{layout_side, part_layout, topology_links, Constellation, Link, Part};
pub use transform::{fit_transform, residual, Similarity};

use crate::correlation_filter::{
    argmax, extract_features, refine_peak, response_at, response_stats, wrap_shift, FeaturePatch, Filter, ResponseStats,
};
use crate::geometry::{BBox, Vec2};
use crate::segmentation::{color_probability, segment, update_model, ColorModel, SegmentationResult};
use crate::spring_system::{solve_ida, DynamicSpring, SolveReport, SpringSystem, StaticSpring};
use crate::{Error, Result};

/// Smallest accepted initial box side, in pixels.
pub const MIN_BOX_SIDE: f64 = 16.0;

/// Stiffness given to parts whose own response carries no information, as a
/// fraction of the strongest static spring. Keeps the system anchored.
const UNINFORMATIVE_STIFFNESS: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct CoarseLayer {
    pub root_filter: Filter,
    pub color_model: ColorModel,
    pub bbox: BBox,
    /// Object area from the previous frame, px².
    pub prev_size: f64,
    /// Search region size `(width, height)` in pixels, fixed at initialization.
    pub window: (f64, f64),
}

#[derive(Debug, Clone)]
pub struct TrackerState {
    pub coarse: CoarseLayer,
    pub constellation: Constellation,
    pub config: TrackerConfig,
    pub frame_index: usize,
}

/// Outcome of coarse localization.
#[derive(Debug, Clone)]
pub struct CoarseEstimate {
    pub translation: Vec2,
    /// The combined map was flat, so no translation was applied.
    pub low_confidence: bool,
    pub alpha_col: f64,
    /// Search region in image coordinates.
    pub search: BBox,
    pub segmentation: Option<SegmentationResult>,
    /// Root response times color probability, indexed by circular shift.
    pub combined: Array2<f64>,
}

/// One part's filter evaluation around its translated position.
#[derive(Debug, Clone)]
pub struct PartObservation {
    pub translated: Vec2,
    pub origin: Vec2,
    pub response: Array2<f64>,
    /// `None` when the response had no positive mass.
    pub stats: Option<ResponseStats>,
    pub stiffness: f64,
    pub anchor: Vec2,
}

#[derive(Debug, Clone, Serialize)]
pub struct FrameResult {
    pub frame_index: usize,
    pub bbox: BBox,
    pub translation: Vec2,
    pub low_confidence: bool,
    pub part_positions: Vec<Vec2>,
    pub part_weights: Vec<f64>,
    pub alpha_col: f64,
    pub updated_parts: Vec<bool>,
    pub initial_energy: f64,
    pub final_energy: f64,
    pub ida_iterations: usize,
}

/// Intermediate maps of a frame, for inspection.
#[derive(Debug, Clone)]
pub struct FrameDebug {
    pub combined: Array2<f64>,
    pub posterior: Option<Array2<f64>>,
    pub mask: Option<Array2<bool>>,
    pub part_responses: Vec<Array2<f64>>,
}

fn part_window(size: (f64, f64), padding: f64) -> (f64, f64) {
    (size.0 * padding, size.1 * padding)
}

/// Prefix sums with a zero first row and column.
fn integral(map: &Array2<f64>) -> Array2<f64> {
    let (h, w) = map.dim();
    let mut s = Array2::zeros((h + 1, w + 1));
    for y in 0..h {
        for x in 0..w {
            s[[y + 1, x + 1]] = map[[y, x]] + s[[y, x + 1]] + s[[y + 1, x]] - s[[y, x]];
        }
    }
    s
}

fn box_mean(sums: &Array2<f64>, x0: i64, y0: i64, x1: i64, y1: i64) -> f64 {
    let (h, w) = (sums.nrows() as i64 - 1, sums.ncols() as i64 - 1);
    let (x0, x1) = (x0.clamp(0, w), x1.clamp(0, w));
    let (y0, y1) = (y0.clamp(0, h), y1.clamp(0, h));
    let area = ((x1 - x0) * (y1 - y0)) as f64;
    if area <= 0.0 {
        return 0.0;
    }
    let at = |y: i64, x: i64| sums[[y as usize, x as usize]];
    (at(y1, x1) - at(y0, x1) - at(y1, x0) + at(y0, x0)) / area
}

/// Fraction of `region`'s pixels marked foreground in `mask`, whose top-left
/// pixel sits at `mask_origin`. Pixels outside the mask count as background.
pub fn mask_fraction(mask: &Array2<bool>, mask_origin: (i64, i64), region: &BBox) -> f64 {
    let x0 = region.x.round() as i64;
    let y0 = region.y.round() as i64;
    let x1 = (region.x + region.width).round() as i64;
    let y1 = (region.y + region.height).round() as i64;
    let total = ((x1 - x0) * (y1 - y0)).max(1) as f64;
    let (h, w) = mask.dim();
    let mut count = 0usize;
    for y in y0.max(mask_origin.1)..y1.min(mask_origin.1 + h as i64) {
        for x in x0.max(mask_origin.0)..x1.min(mask_origin.0 + w as i64) {
            if mask[[(y - mask_origin.1) as usize, (x - mask_origin.0) as usize]] {
                count += 1;
            }
        }
    }
    count as f64 / total
}

impl TrackerState {
    /// Trains the root filter and color model on `bbox` and splits it into parts.
    pub fn initialize(image: &RgbImage, bbox: BBox, config: TrackerConfig) -> Result<Self> {
        config.validate()?;
        if !bbox.is_valid() || bbox.width < MIN_BOX_SIDE || bbox.height < MIN_BOX_SIDE {
            return Err(Error::Init(format!(
                "initial box {bbox} must be at least {MIN_BOX_SIDE}x{MIN_BOX_SIDE} px"
            )));
        }
        let frame = BBox::new(0.0, 0.0, image.width() as f64, image.height() as f64);
        if !frame.contains(bbox.center()) {
            return Err(Error::Init(format!(
                "initial box {bbox} is centered outside the {}x{} image",
                image.width(),
                image.height()
            )));
        }
        let params = config.filter_params();
        let cell = config.cell_size;
        let window = (bbox.width * config.padding, bbox.height * config.padding);
        let root_patch = extract_features(image, bbox.center(), window, cell, true)?;
        let root_filter = Filter::fit(&root_patch, (bbox.width, bbox.height), &params)?;
        let color_model = ColorModel::from_image(image, &bbox, &config.color_params())?;

        let (centers, size) = part_layout(&bbox, config.parts);
        let parts = centers
            .iter()
            .enumerate()
            .map(|(index, &position)| {
                let patch = extract_features(image, position, part_window(size, config.padding), cell, true)?;
                Ok(Part {
                    index,
                    position,
                    size,
                    filter: Filter::fit(&patch, size, &params)?,
                })
            })
            .collect::<Result<Vec<_>>>()
            .map_err(|e| Error::Init(format!("part filters: {e}")))?;
        let links = topology_links(config.topology, layout_side(config.parts))
            .into_iter()
            .map(|(a, b)| Link {
                a,
                b,
                mu: centers[a].distance(centers[b]),
            })
            .collect();
        Ok(TrackerState {
            coarse: CoarseLayer {
                root_filter,
                color_model,
                bbox,
                prev_size: bbox.area(),
                window,
            },
            constellation: Constellation {
                parts,
                links,
                spring_rate: config.alpha_spr,
            },
            config,
            frame_index: 0,
        })
    }

    pub fn bbox(&self) -> BBox {
        self.coarse.bbox
    }

    fn uses_color(&self) -> bool {
        self.config.mode != TrackerMode::CoarseNoColor
    }

    /// Maximizes root response times color probability over the search
    /// region centered at the previous position.
    pub fn coarse_localize(&self, image: &RgbImage) -> Result<CoarseEstimate> {
        let cell = self.config.cell_size;
        let center = self.coarse.bbox.center();
        let patch = extract_features(image, center, self.coarse.window, cell, true)?;
        let response = self.coarse.root_filter.respond(&patch)?;
        let (rows, cols) = response.dim();
        let (pw, ph) = ((cols * cell) as f64, (rows * cell) as f64);
        let search = BBox::from_center(patch.origin, pw, ph);

        let (segmentation, alpha_col) = if self.uses_color() {
            let seg = segment(
                image,
                &search,
                &self.coarse.bbox,
                &self.coarse.color_model,
                self.coarse.prev_size,
                &self.config.color_params(),
            )?;
            let alpha = seg.alpha_col;
            (Some(seg), alpha)
        } else {
            (None, 1.0)
        };

        let combined = match &segmentation {
            Some(seg) if alpha_col < 1.0 => {
                let sums = integral(&color_probability(&seg.posterior, alpha_col));
                let half = cell as i64 / 2;
                Array2::from_shape_fn((rows, cols), |(m, n)| {
                    let cx = (pw / 2.0) as i64 + wrap_shift(n, cols) * cell as i64;
                    let cy = (ph / 2.0) as i64 + wrap_shift(m, rows) * cell as i64;
                    let color = box_mean(&sums, cx - half, cy - half, cx - half + cell as i64, cy - half + cell as i64);
                    response[[m, n]].max(0.0) * color
                })
            }
            _ => response.mapv(|v| v.max(0.0)),
        };

        let (lo, hi) = combined
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
        let flat = !(hi > 0.0) || hi - lo <= 1e-12 * hi.abs();
        let translation = if flat {
            Vec2::ZERO
        } else {
            // The color map only picks the cell; sub-cell position comes
            // from the sharper root response.
            let (sy, sx) = refine_peak(&response, argmax(&combined));
            patch.origin + Vec2::new(sx * cell as f64, sy * cell as f64) - center
        };
        Ok(CoarseEstimate {
            translation,
            low_confidence: flat,
            alpha_col,
            search,
            segmentation,
            combined,
        })
    }

    /// Evaluates each part filter around its translated position and turns
    /// the responses into anchors and stiffnesses.
    pub fn build_spring_system(&self, image: &RgbImage, translation: Vec2) -> Result<(SpringSystem, Vec<PartObservation>)> {
        let cell = self.config.cell_size;
        let mut observations = Vec::with_capacity(self.constellation.parts.len());
        for part in &self.constellation.parts {
            let translated = part.position + translation;
            let patch = extract_features(image, translated, part_window(part.size, self.config.padding), cell, true)?;
            let response = part.filter.respond(&patch)?;
            let stats = match response_stats(&response, patch.origin, cell) {
                Ok(s) => Some(s),
                Err(Error::Uninformative(_)) => None,
                Err(e) => return Err(e),
            };
            let (stiffness, anchor) = match stats {
                Some(s) => (
                    static_stiffness(s.peak_value, s.weighted_variance, self.config.sigma2_floor),
                    s.peak_pos,
                ),
                None => (0.0, translated),
            };
            observations.push(PartObservation {
                translated,
                origin: patch.origin,
                response,
                stats,
                stiffness,
                anchor,
            });
        }
        let dynamic = self
            .constellation
            .links
            .iter()
            .map(|l| DynamicSpring {
                a: l.a,
                b: l.b,
                stiffness: dynamic_stiffness(l.mu, observations[l.a].anchor.distance(observations[l.b].anchor)),
                rest_length: l.mu,
            })
            .collect();
        let statics = observations
            .iter()
            .enumerate()
            .map(|(i, o)| StaticSpring {
                node: i,
                anchor: i,
                stiffness: o.stiffness,
            })
            .collect();
        let system = SpringSystem::new(
            observations.iter().map(|o| o.translated).collect(),
            observations.iter().map(|o| o.anchor).collect(),
            dynamic,
            statics,
        )?;
        Ok((system, observations))
    }

    /// Response of each part at its MAP position.
    pub fn part_weights(&self, observations: &[PartObservation], positions: &[Vec2]) -> Vec<f64> {
        let cell = self.config.cell_size as f64;
        observations
            .iter()
            .zip(positions)
            .map(|(o, &p)| {
                let shift = (p - o.origin) * (1.0 / cell);
                response_at(&o.response, shift.y, shift.x)
            })
            .collect()
    }

    /// Gated part updates and preferred-distance adaptation. Returns which
    /// part filters were updated.
    pub fn update_parts(
        &mut self,
        image: &RgbImage,
        positions: &[Vec2],
        weights: &[f64],
        mask: Option<(&Array2<bool>, (i64, i64))>,
    ) -> Result<Vec<bool>> {
        let gates = part_gates(
            weights,
            &self.constellation.parts.iter().map(|p| p.size).collect::<Vec<_>>(),
            positions,
            mask,
            self.config.part_gate_ratio,
            self.config.part_mask_fraction,
        );
        let cell = self.config.cell_size;
        for ((part, &pos), &gate) in self.constellation.parts.iter_mut().zip(positions).zip(&gates) {
            if gate && self.config.learn_rate > 0.0 {
                let patch = extract_features(image, pos, part_window(part.size, self.config.padding), cell, true)?;
                part.filter = part.filter.update(&patch, self.config.learn_rate)?;
            }
            part.position = pos;
        }
        self.constellation.update_lengths(positions);
        Ok(gates)
    }

    /// Root filter and color model update at the new box.
    pub fn update_coarse(&mut self, image: &RgbImage, bbox: BBox, alpha_col: f64) -> Result<()> {
        if self.config.learn_rate > 0.0 {
            let patch = extract_features(image, bbox.center(), self.coarse.window, self.config.cell_size, true)?;
            self.coarse.root_filter = self.coarse.root_filter.update(&patch, self.config.learn_rate)?;
        }
        if self.uses_color() {
            self.coarse.color_model = update_model(
                &self.coarse.color_model,
                &bbox,
                self.config.alpha_sur,
                image,
                self.config.alpha_hist,
                alpha_col < 1.0,
            )?;
        }
        self.coarse.bbox = bbox;
        self.coarse.prev_size = bbox.area();
        Ok(())
    }

    /// One full tracking iteration. On error the state is left untouched.
    pub fn track_frame(&mut self, image: &RgbImage) -> Result<FrameResult> {
        self.track_frame_debug(image).map(|(r, _)| r)
    }

    pub fn track_frame_debug(&mut self, image: &RgbImage) -> Result<(FrameResult, FrameDebug)> {
        let mut next = self.clone();
        let out = next.step(image)?;
        *self = next;
        Ok(out)
    }

    fn step(&mut self, image: &RgbImage) -> Result<(FrameResult, FrameDebug)> {
        let coarse = self.coarse_localize(image)?;
        let prev_box = self.coarse.bbox;
        let mask = coarse.segmentation.as_ref().map(|s| {
            let origin = (coarse.search.x.round() as i64, coarse.search.y.round() as i64);
            (&s.mask, origin)
        });

        let mut result = FrameResult {
            frame_index: self.frame_index + 1,
            bbox: prev_box.translated(coarse.translation),
            translation: coarse.translation,
            low_confidence: coarse.low_confidence,
            part_positions: Vec::new(),
            part_weights: Vec::new(),
            alpha_col: coarse.alpha_col,
            updated_parts: Vec::new(),
            initial_energy: 0.0,
            final_energy: 0.0,
            ida_iterations: 0,
        };
        let mut part_responses = Vec::new();

        if self.config.mode == TrackerMode::Full {
            let prev_positions = self.constellation.positions();
            let (system, observations) = self.build_spring_system(image, coarse.translation)?;
            let report = map_inference(&system, &self.config)?;
            let positions = report.final_positions.clone();
            let transform = fit_transform(&prev_positions, &positions)?;
            let bbox = transform.apply_to_box(&prev_box);
            if !bbox.is_valid() {
                return Err(Error::NonFinite {
                    iteration: self.frame_index + 1,
                });
            }
            let weights = self.part_weights(&observations, &positions);
            let updated = self.update_parts(image, &positions, &weights, mask)?;
            result.bbox = bbox;
            result.part_positions = positions;
            result.part_weights = weights;
            result.updated_parts = updated;
            result.initial_energy = report.initial_energy;
            result.final_energy = report.final_energy;
            result.ida_iterations = report.iterations;
            part_responses = observations.into_iter().map(|o| o.response).collect();
        }

        self.update_coarse(image, result.bbox, coarse.alpha_col)?;
        self.frame_index += 1;
        let debug = FrameDebug {
            combined: coarse.combined,
            posterior: coarse.segmentation.as_ref().map(|s| s.posterior.clone()),
            mask: coarse.segmentation.map(|s| s.mask),
            part_responses,
        };
        Ok((result, debug))
    }
}

/// `k = w / max(sigma², floor)`; non-positive weights give a free part.
pub fn static_stiffness(weight: f64, variance: f64, floor: f64) -> f64 {
    if weight > 0.0 {
        weight / variance.max(floor)
    } else {
        0.0
    }
}

/// `((mu - |d|) / mu)²`: zero when the anchors agree with the preferred distance.
pub fn dynamic_stiffness(mu: f64, anchor_distance: f64) -> f64 {
    let r = (mu - anchor_distance) / mu;
    r * r
}

/// Part `i` passes if its weight reaches `ratio` of the best weight and, when
/// a mask is given, at least `fraction` of its region is foreground.
pub fn part_gates(
    weights: &[f64],
    sizes: &[(f64, f64)],
    positions: &[Vec2],
    mask: Option<(&Array2<bool>, (i64, i64))>,
    ratio: f64,
    fraction: f64,
) -> Vec<bool> {
    let best = weights.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    weights
        .iter()
        .zip(sizes)
        .zip(positions)
        .map(|((&w, &size), &p)| {
            let strong = best > 0.0 && w >= ratio * best;
            let covered = match mask {
                Some((m, origin)) => mask_fraction(m, origin, &BBox::from_center(p, size.0, size.1)) >= fraction,
                None => true,
            };
            strong && covered
        })
        .collect()
}

/// Equilibrium of the constellation's spring system. Parts with no static
/// stiffness get a tiny one so every node stays anchored.
pub fn map_inference(system: &SpringSystem, config: &TrackerConfig) -> Result<SolveReport> {
    let strongest = system
        .static_springs()
        .iter()
        .map(|s| s.stiffness)
        .fold(0.0, f64::max);
    let floor = UNINFORMATIVE_STIFFNESS * if strongest > 0.0 { strongest } else { 1.0 };
    let system = if system.static_springs().iter().any(|s| s.stiffness <= 0.0) {
        let statics = system
            .static_springs()
            .iter()
            .map(|s| StaticSpring {
                stiffness: s.stiffness.max(floor),
                ..*s
            })
            .collect();
        SpringSystem::new(
            system.nodes().to_vec(),
            system.anchors().to_vec(),
            system.dynamic_springs().to_vec(),
            statics,
        )?
    } else {
        system.clone()
    };
    solve_ida(&system, config.ida_options())
}

/// Tracks a whole frame sequence starting from `init`; the first result is
/// the initial box.
pub fn track_sequence(frames: &[RgbImage], init: BBox, config: &TrackerConfig) -> Result<Vec<BBox>> {
    let Some(first) = frames.first() else {
        return Ok(Vec::new());
    };
    let mut state = TrackerState::initialize(first, init, config.clone())?;
    let mut boxes = vec![init];
    for frame in &frames[1..] {
        boxes.push(state.track_frame(frame)?.bbox);
    }
    Ok(boxes)
}

/// Copy of `FeaturePatch` extraction at the root window, exposed for tools.
pub fn root_patch(state: &TrackerState, image: &RgbImage, center: Vec2) -> Result<FeaturePatch> {
    extract_features(image, center, state.coarse.window, state.config.cell_size, true)
}
