use image::RgbImage;
use ndarray::{Array2, Array3};

use super::hog::{hog, HOG_CHANNELS};
use crate::geometry::Vec2;
use crate::imaging::{crop_replicate, luma};
use crate::{Error, Result};

/// Default HOG cell size in pixels.
pub const CELL_SIZE: usize = 4;

/// Multi-channel features on a cell grid, `height x width x channels`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeaturePatch {
    pub channels: Array3<f64>,
    pub cell_size: usize,
    /// Patch center in image coordinates.
    pub origin: Vec2,
    pub windowed: bool,
}

impl FeaturePatch {
    pub fn new(channels: Array3<f64>, cell_size: usize, origin: Vec2, windowed: bool) -> Result<Self> {
        if channels.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("feature patch contains non-finite values".into()));
        }
        Ok(FeaturePatch {
            channels,
            cell_size,
            origin,
            windowed,
        })
    }

    /// Spatial grid size `(rows, cols)`.
    pub fn grid(&self) -> (usize, usize) {
        let (h, w, _) = self.channels.dim();
        (h, w)
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        self.channels.dim()
    }

    pub fn norm_sq(&self) -> f64 {
        self.channels.iter().map(|v| v * v).sum()
    }
}

/// Hann window of length `n`; a single sample is 1.
pub fn hann(n: usize) -> Vec<f64> {
    if n <= 1 {
        return vec![1.0; n];
    }
    (0..n)
        .map(|i| 0.5 * (1.0 - (2.0 * std::f64::consts::PI * i as f64 / (n - 1) as f64).cos()))
        .collect()
}

pub fn cosine_window(rows: usize, cols: usize) -> Array2<f64> {
    let (wr, wc) = (hann(rows), hann(cols));
    Array2::from_shape_fn((rows, cols), |(r, c)| wr[r] * wc[c])
}

/// Grid size in cells for a patch of `size` pixels.
pub fn cell_grid(size: (f64, f64), cell_size: usize) -> (usize, usize) {
    let cols = (size.0 / cell_size as f64).floor().max(0.0) as usize;
    let rows = (size.1 / cell_size as f64).floor().max(0.0) as usize;
    (rows, cols)
}

/// HOG plus a cell-averaged, mean-subtracted grayscale channel for the
/// `size = (width, height)` pixel patch centered at `center`.
///
/// The patch spans a whole number of cells; its top-left pixel is rounded,
/// so the returned `origin` is the exact center that was sampled.
pub fn extract_features(
    image: &RgbImage,
    center: Vec2,
    size: (f64, f64),
    cell_size: usize,
    windowed: bool,
) -> Result<FeaturePatch> {
    if cell_size == 0 || !(size.0 > 0.0 && size.1 > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "patch size {size:?} and cell size {cell_size} must be positive"
        )));
    }
    let (rows, cols) = cell_grid(size, cell_size);
    if rows <= 1 || cols <= 1 {
        return Err(Error::InvalidArgument(format!(
            "patch {size:?} spans only {cols}x{rows} cells of {cell_size} px"
        )));
    }
    let (pw, ph) = (cols * cell_size, rows * cell_size);
    let left = (center.x - pw as f64 / 2.0).round() as i64;
    let top = (center.y - ph as f64 / 2.0).round() as i64;
    let origin = Vec2::new(left as f64 + pw as f64 / 2.0, top as f64 + ph as f64 / 2.0);
    let pixels = crop_replicate(image, left, top, pw, ph);
    Ok(features_from_pixels(&pixels, cell_size, origin, windowed))
}

/// Feature extraction on an already cropped `h x w x 3` array.
pub fn features_from_pixels(pixels: &Array3<f64>, cell_size: usize, origin: Vec2, windowed: bool) -> FeaturePatch {
    let hog = hog(pixels, cell_size);
    let (rows, cols, _) = hog.dim();
    let gray = luma(pixels);
    let area = (cell_size * cell_size) as f64;
    let mut cell_gray = Array2::<f64>::zeros((rows, cols));
    for r in 0..rows {
        for c in 0..cols {
            let mut sum = 0.0;
            for y in r * cell_size..(r + 1) * cell_size {
                for x in c * cell_size..(c + 1) * cell_size {
                    sum += gray[[y, x]];
                }
            }
            cell_gray[[r, c]] = sum / area;
        }
    }
    let mean = cell_gray.mean().unwrap_or(0.0);
    let mut channels = Array3::<f64>::zeros((rows, cols, HOG_CHANNELS + 1));
    let window = windowed.then(|| cosine_window(rows, cols));
    for r in 0..rows {
        for c in 0..cols {
            let wgt = window.as_ref().map_or(1.0, |w| w[[r, c]]);
            for k in 0..HOG_CHANNELS {
                channels[[r, c, k]] = hog[[r, c, k]] * wgt;
            }
            channels[[r, c, HOG_CHANNELS]] = (cell_gray[[r, c]] - mean) * wgt;
        }
    }
    FeaturePatch {
        channels,
        cell_size,
        origin,
        windowed,
    }
}
