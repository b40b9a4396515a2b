//! 31-channel HOG in the Felzenszwalb layout: 18 contrast-sensitive
//! orientations, 9 contrast-insensitive orientations and 4 gradient-energy
//! (texture) features per cell.

use std::f64::consts::PI;

use ndarray::{Array2, Array3};

pub const HOG_CHANNELS: usize = 31;
const ORIENTATIONS: usize = 9;
const TRUNCATION: f64 = 0.2;
const EPS: f64 = 1e-4;

/// Per-pixel gradient magnitude and contrast-sensitive orientation bin,
/// taking the color channel with the strongest gradient.
fn gradients(pixels: &Array3<f64>) -> (Array2<f64>, Array2<usize>) {
    let (h, w, channels) = pixels.dim();
    let mut magnitude = Array2::zeros((h, w));
    let mut bin = Array2::zeros((h, w));
    let bins = 2 * ORIENTATIONS;
    for y in 0..h {
        let (yu, yd) = (y.saturating_sub(1), (y + 1).min(h - 1));
        for x in 0..w {
            let (xl, xr) = (x.saturating_sub(1), (x + 1).min(w - 1));
            let mut best = (0.0, 0.0, 0.0);
            for c in 0..channels {
                let dx = pixels[[y, xr, c]] - pixels[[y, xl, c]];
                let dy = pixels[[yd, x, c]] - pixels[[yu, x, c]];
                let m = dx * dx + dy * dy;
                if m > best.0 {
                    best = (m, dx, dy);
                }
            }
            let (m, dx, dy) = best;
            magnitude[[y, x]] = m.sqrt();
            let angle = dy.atan2(dx).rem_euclid(2.0 * PI);
            bin[[y, x]] = ((angle / (2.0 * PI) * bins as f64).round() as usize) % bins;
        }
    }
    (magnitude, bin)
}

/// HOG features of an `h x w x channels` patch with values in `[0, 1]`.
/// The output grid is `(h / cell) x (w / cell)`.
pub fn hog(pixels: &Array3<f64>, cell: usize) -> Array3<f64> {
    let (h, w, _) = pixels.dim();
    let (hc, wc) = (h / cell, w / cell);
    let bins = 2 * ORIENTATIONS;
    let (magnitude, bin) = gradients(pixels);

    // bilinear spatial voting into the cell histograms
    let mut hist = Array3::<f64>::zeros((hc, wc, bins));
    let cs = cell as f64;
    for y in 0..hc * cell {
        let fy = (y as f64 + 0.5) / cs - 0.5;
        let y0 = fy.floor();
        let wy1 = fy - y0;
        for x in 0..wc * cell {
            let m = magnitude[[y, x]];
            if m == 0.0 {
                continue;
            }
            let fx = (x as f64 + 0.5) / cs - 0.5;
            let x0 = fx.floor();
            let wx1 = fx - x0;
            let o = bin[[y, x]];
            for (dy, wy) in [(0.0, 1.0 - wy1), (1.0, wy1)] {
                let cy = y0 + dy;
                if cy < 0.0 || cy >= hc as f64 {
                    continue;
                }
                for (dx, wx) in [(0.0, 1.0 - wx1), (1.0, wx1)] {
                    let cx = x0 + dx;
                    if cx < 0.0 || cx >= wc as f64 {
                        continue;
                    }
                    hist[[cy as usize, cx as usize, o]] += m * wy * wx;
                }
            }
        }
    }

    // gradient energy of each cell from the contrast-insensitive histogram
    let mut energy = Array2::<f64>::zeros((hc, wc));
    for cy in 0..hc {
        for cx in 0..wc {
            energy[[cy, cx]] = (0..ORIENTATIONS)
                .map(|o| {
                    let v = hist[[cy, cx, o]] + hist[[cy, cx, o + ORIENTATIONS]];
                    v * v
                })
                .sum();
        }
    }
    let energy_at = |y: isize, x: isize| -> f64 {
        let yy = y.clamp(0, hc as isize - 1) as usize;
        let xx = x.clamp(0, wc as isize - 1) as usize;
        energy[[yy, xx]]
    };

    let mut out = Array3::<f64>::zeros((hc, wc, HOG_CHANNELS));
    for cy in 0..hc {
        for cx in 0..wc {
            let (y, x) = (cy as isize, cx as isize);
            // the four 2x2 blocks that contain this cell
            let norms: [f64; 4] = [(-1, -1), (-1, 0), (0, -1), (0, 0)].map(|(oy, ox)| {
                let (by, bx) = (y + oy, x + ox);
                let sum = energy_at(by, bx) + energy_at(by, bx + 1) + energy_at(by + 1, bx) + energy_at(by + 1, bx + 1);
                1.0 / (sum + EPS).sqrt()
            });
            let mut texture = [0.0; 4];
            for o in 0..bins {
                let v = hist[[cy, cx, o]];
                let mut acc = 0.0;
                for (k, n) in norms.iter().enumerate() {
                    let t = (v * n).min(TRUNCATION);
                    acc += t;
                    texture[k] += t;
                }
                out[[cy, cx, o]] = 0.5 * acc;
            }
            for o in 0..ORIENTATIONS {
                let v = hist[[cy, cx, o]] + hist[[cy, cx, o + ORIENTATIONS]];
                let acc: f64 = norms.iter().map(|n| (v * n).min(TRUNCATION)).sum();
                out[[cy, cx, bins + o]] = 0.5 * acc;
            }
            for (k, t) in texture.iter().enumerate() {
                out[[cy, cx, bins + ORIENTATIONS + k]] = 0.2357 * t;
            }
        }
    }
    out
}
