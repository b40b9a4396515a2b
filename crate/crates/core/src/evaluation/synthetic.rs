use image::{Rgb, RgbImage};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Frames, Sequence};
use crate::geometry::{BBox, Vec2};
use crate::{Error, Result};

/// An opaque rectangle drawn over the lower part of the target.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OcclusionSpec {
    /// First occluded frame.
    pub start: usize,
    /// Last occluded frame, inclusive.
    pub end: usize,
    /// Covered fraction of the box height, measured from the bottom.
    pub fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticSpec {
    pub name: String,
    pub width: u32,
    pub height: u32,
    pub frames: usize,
    pub init: BBox,
    /// Pixels per frame.
    pub velocity: Vec2,
    /// Relative size change per frame.
    pub scale_rate: f64,
    /// Amplitude in pixels of independent quadrant motion.
    pub deformation: f64,
    pub occlusion: Option<OcclusionSpec>,
    /// A static copy of the target texture in background colors.
    pub distractor: Option<BBox>,
    /// Amplitude of per-pixel uniform noise, in 8-bit levels.
    pub noise: f64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            name: "synthetic".into(),
            width: 320,
            height: 240,
            frames: 100,
            init: BBox::new(40.0, 96.0, 48.0, 48.0),
            velocity: Vec2::new(2.0, 0.0),
            scale_rate: 0.002,
            deformation: 0.0,
            occlusion: None,
            distractor: None,
            noise: 4.0,
        }
    }
}

struct Texture {
    size: usize,
    data: Vec<[f64; 3]>,
}

impl Texture {
    /// Random overlapping discs and bars drawn from `palette` on a base
    /// color, with radii in `radius` texels.
    fn random(rng: &mut ChaCha8Rng, size: usize, shapes: usize, radius: (f64, f64), palette: &[[f64; 3]]) -> Self {
        let pick = |rng: &mut ChaCha8Rng| {
            let base = palette[rng.random_range(0..palette.len())];
            let shade = rng.random_range(0.55..1.0);
            base.map(|c| c * shade)
        };
        let mut data = vec![pick(rng); size * size];
        for _ in 0..shapes {
            let color = pick(rng);
            let cx = rng.random_range(0.0..size as f64);
            let cy = rng.random_range(0.0..size as f64);
            let rx = rng.random_range(radius.0..radius.1);
            let ry = rng.random_range(radius.0..radius.1);
            let disc = rng.random_bool(0.5);
            let span = |c: f64, r: f64| (c - r).floor().max(0.0) as usize..((c + r).ceil() as usize + 1).min(size);
            for y in span(cy, ry) {
                for x in span(cx, rx) {
                    let (dx, dy) = ((x as f64 - cx) / rx, (y as f64 - cy) / ry);
                    let inside = if disc {
                        dx * dx + dy * dy <= 1.0
                    } else {
                        dx.abs() <= 1.0 && dy.abs() <= 1.0
                    };
                    if inside {
                        data[y * size + x] = color;
                    }
                }
            }
        }
        Texture { size, data }
    }

    /// Bilinear sample at normalized `(u, v)`, clamped to the edge.
    fn sample(&self, u: f64, v: f64) -> [f64; 3] {
        let n = self.size as f64;
        let x = (u * n - 0.5).clamp(0.0, n - 1.0);
        let y = (v * n - 0.5).clamp(0.0, n - 1.0);
        let (x0, y0) = (x.floor() as usize, y.floor() as usize);
        let (x1, y1) = ((x0 + 1).min(self.size - 1), (y0 + 1).min(self.size - 1));
        let (fx, fy) = (x - x0 as f64, y - y0 as f64);
        let at = |xx: usize, yy: usize| self.data[yy * self.size + xx];
        let mut out = [0.0; 3];
        for (c, o) in out.iter_mut().enumerate() {
            *o = at(x0, y0)[c] * (1.0 - fx) * (1.0 - fy)
                + at(x1, y0)[c] * fx * (1.0 - fy)
                + at(x0, y1)[c] * (1.0 - fx) * fy
                + at(x1, y1)[c] * fx * fy;
        }
        out
    }
}

const TARGET_PALETTE: [[f64; 3]; 4] = [
    [230.0, 40.0, 30.0],
    [240.0, 140.0, 20.0],
    [235.0, 210.0, 40.0],
    [200.0, 30.0, 90.0],
];

const BACKGROUND_PALETTE: [[f64; 3]; 4] = [
    [40.0, 150.0, 60.0],
    [40.0, 90.0, 200.0],
    [120.0, 120.0, 130.0],
    [60.0, 170.0, 170.0],
];

const OCCLUDER_COLOR: [f64; 3] = [70.0, 60.0, 160.0];

/// Ground-truth box of frame `t`.
pub fn ground_truth_box(spec: &SyntheticSpec, t: usize) -> BBox {
    let scale = (1.0 + spec.scale_rate).powi(t as i32);
    let center = spec.init.center() + spec.velocity * t as f64;
    BBox::from_center(center, spec.init.width * scale, spec.init.height * scale)
}

/// Renders a deterministic sequence of a textured target moving over a
/// textured background, with exact ground truth.
pub fn make_synthetic_sequence(spec: &SyntheticSpec, seed: u64) -> Result<Sequence> {
    if spec.frames == 0 || spec.width == 0 || spec.height == 0 {
        return Err(Error::InvalidArgument("synthetic sequence needs frames and a positive size".into()));
    }
    if !spec.init.is_valid() {
        return Err(Error::InvalidArgument(format!("invalid initial box {}", spec.init)));
    }
    let frame = BBox::new(0.0, 0.0, spec.width as f64, spec.height as f64);
    let ground_truth: Vec<BBox> = (0..spec.frames).map(|t| ground_truth_box(spec, t)).collect();
    for (t, b) in ground_truth.iter().enumerate() {
        if b.x < 0.0 || b.y < 0.0 || b.right() > frame.width || b.bottom() > frame.height {
            return Err(Error::InvalidArgument(format!("target leaves the frame at frame {t}: {b}")));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let target = Texture::random(&mut rng, 64, 40, (2.5, 13.0), &TARGET_PALETTE);
    let bg_size = spec.width.max(spec.height) as usize;
    let background = Texture::random(&mut rng, bg_size, bg_size * 6, (2.0, 10.0), &BACKGROUND_PALETTE);
    let phases: Vec<[f64; 4]> = (0..4)
        .map(|_| {
            [
                rng.random_range(0.0..std::f64::consts::TAU),
                rng.random_range(0.0..std::f64::consts::TAU),
                rng.random_range(0.08..0.25),
                rng.random_range(0.08..0.25),
            ]
        })
        .collect();

    let mut frames = Vec::with_capacity(spec.frames);
    let bg_scale = bg_size as f64;
    for (t, gt) in ground_truth.iter().enumerate() {
        let mut canvas: Vec<[f64; 3]> = (0..spec.height)
            .flat_map(|y| (0..spec.width).map(move |x| (x, y)))
            .map(|(x, y)| background.sample((x as f64 + 0.5) / bg_scale, (y as f64 + 0.5) / bg_scale))
            .collect();
        if let Some(d) = spec.distractor {
            let (x0, y0) = (d.x.round().max(0.0) as u32, d.y.round().max(0.0) as u32);
            let x1 = (d.right().round() as u32).min(spec.width);
            let y1 = (d.bottom().round() as u32).min(spec.height);
            for y in y0..y1 {
                for x in x0..x1 {
                    let u = (x as f64 + 0.5 - d.x) / d.width;
                    let v = (y as f64 + 0.5 - d.y) / d.height;
                    let [r, g, b] = target.sample(u, v);
                    canvas[(y * spec.width + x) as usize] = [b, g, r];
                }
            }
        }
        // Quadrant centers move independently while the outline stays fixed:
        // the offsets are interpolated and tapered to zero at the box edge, so
        // the ground truth remains the exact extent of the target.
        let offsets: Vec<Vec2> = phases
            .iter()
            .map(|p| {
                Vec2::new(
                    spec.deformation * (p[2] * t as f64 + p[0]).sin(),
                    spec.deformation * (p[3] * t as f64 + p[1]).sin(),
                )
            })
            .collect();
        let warp = |u: f64, v: f64| {
            let a = (2.0 * u - 0.5).clamp(0.0, 1.0);
            let b = (2.0 * v - 0.5).clamp(0.0, 1.0);
            let taper = 2.0 * (std::f64::consts::PI * u).sin() * (std::f64::consts::PI * v).sin();
            (offsets[0] * ((1.0 - a) * (1.0 - b))
                + offsets[1] * (a * (1.0 - b))
                + offsets[2] * ((1.0 - a) * b)
                + offsets[3] * (a * b))
                * taper
        };
        let x_lo = gt.x.floor().max(0.0) as u32;
        let y_lo = gt.y.floor().max(0.0) as u32;
        let x_hi = (gt.right().ceil() as u32).min(spec.width);
        let y_hi = (gt.bottom().ceil() as u32).min(spec.height);
        for y in y_lo..y_hi {
            for x in x_lo..x_hi {
                let (px, py) = (x as f64 + 0.5, y as f64 + 0.5);
                let (u0, v0) = ((px - gt.x) / gt.width, (py - gt.y) / gt.height);
                if !((0.0..1.0).contains(&u0) && (0.0..1.0).contains(&v0)) {
                    continue;
                }
                let (mut u, mut v) = (u0, v0);
                for _ in 0..4 {
                    let d = warp(u, v);
                    u = ((px - d.x - gt.x) / gt.width).clamp(0.0, 1.0);
                    v = ((py - d.y - gt.y) / gt.height).clamp(0.0, 1.0);
                }
                canvas[(y * spec.width + x) as usize] = target.sample(u, v);
            }
        }
        if let Some(occ) = spec.occlusion.filter(|o| (o.start..=o.end).contains(&t)) {
            let top = gt.bottom() - gt.height * occ.fraction;
            let (x0, x1) = ((gt.x - 8.0).max(0.0) as u32, ((gt.right() + 8.0) as u32).min(spec.width));
            let (y0, y1) = (top.round().max(0.0) as u32, ((gt.bottom() + 8.0) as u32).min(spec.height));
            for y in y0..y1 {
                for x in x0..x1 {
                    let stripe = if (x / 6 + y / 6) % 2 == 0 { 1.0 } else { 0.75 };
                    canvas[(y * spec.width + x) as usize] = OCCLUDER_COLOR.map(|c| c * stripe);
                }
            }
        }
        let image = RgbImage::from_fn(spec.width, spec.height, |x, y| {
            let px = canvas[(y * spec.width + x) as usize];
            Rgb(px.map(|c| {
                let n = if spec.noise > 0.0 {
                    rng.random_range(-spec.noise..spec.noise)
                } else {
                    0.0
                };
                (c + n).round().clamp(0.0, 255.0) as u8
            }))
        });
        frames.push(image);
    }
    Ok(Sequence {
        name: spec.name.clone(),
        frames: Frames::Memory(frames),
        ground_truth,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(frames: usize) -> SyntheticSpec {
        SyntheticSpec {
            frames,
            ..SyntheticSpec::default()
        }
    }

    #[test]
    fn static_target() {
        let spec = SyntheticSpec {
            velocity: Vec2::ZERO,
            scale_rate: 0.0,
            ..small(5)
        };
        let seq = make_synthetic_sequence(&spec, 1).unwrap();
        assert!(seq.ground_truth.iter().all(|b| *b == spec.init));
    }

    #[test]
    fn arithmetic_centers() {
        let spec = SyntheticSpec {
            scale_rate: 0.0,
            ..small(6)
        };
        let seq = make_synthetic_sequence(&spec, 1).unwrap();
        for w in seq.ground_truth.windows(2) {
            assert!((w[1].center().x - w[0].center().x - 2.0).abs() < 1e-12);
            assert_eq!(w[1].center().y, w[0].center().y);
        }
    }

    #[test]
    fn deterministic() {
        let spec = small(3);
        let a = make_synthetic_sequence(&spec, 9).unwrap();
        let b = make_synthetic_sequence(&spec, 9).unwrap();
        for i in 0..3 {
            assert_eq!(a.frame(i).unwrap().as_raw(), b.frame(i).unwrap().as_raw());
        }
        let c = make_synthetic_sequence(&spec, 10).unwrap();
        assert_ne!(a.frame(0).unwrap().as_raw(), c.frame(0).unwrap().as_raw());
    }

    #[test]
    fn leaving_frame_is_an_error() {
        let spec = SyntheticSpec {
            velocity: Vec2::new(10.0, 0.0),
            ..small(100)
        };
        assert!(make_synthetic_sequence(&spec, 1).is_err());
    }

    #[test]
    fn occluder_drawn_on_schedule() {
        let spec = SyntheticSpec {
            velocity: Vec2::ZERO,
            scale_rate: 0.0,
            noise: 0.0,
            occlusion: Some(OcclusionSpec {
                start: 1,
                end: 1,
                fraction: 0.5,
            }),
            ..small(3)
        };
        let seq = make_synthetic_sequence(&spec, 2).unwrap();
        let probe = |i| seq.frame(i).unwrap().get_pixel(64, 135).0;
        assert_eq!(probe(0), probe(2));
        assert_ne!(probe(0), probe(1));
    }
}
