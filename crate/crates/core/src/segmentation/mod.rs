//! Global color model: foreground/background HSV histograms, Bayes
//! backprojection, smoothing of the posterior and the informativeness test.

use image::RgbImage;
use ndarray::Array2;

use crate::geometry::BBox;
use crate::{Error, Result};

pub const DEFAULT_BINS: usize = 16;
pub const MASK_THRESHOLD: f64 = 0.5;
pub const REGULARIZE_ITERATIONS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ColorParams {
    pub bins: usize,
    pub alpha_min: f64,
    pub alpha_max: f64,
    pub surround_factor: f64,
    pub hist_rate: f64,
    pub regularize_iterations: usize,
}

impl Default for ColorParams {
    fn default() -> Self {
        ColorParams {
            bins: DEFAULT_BINS,
            alpha_min: 0.2,
            alpha_max: 2.0,
            surround_factor: 1.6,
            hist_rate: 0.05,
            regularize_iterations: REGULARIZE_ITERATIONS,
        }
    }
}

/// Hue in degrees `[0, 360)`, saturation and value in `[0, 1]`.
pub fn rgb_to_hsv(rgb: [u8; 3]) -> (f64, f64, f64) {
    let [r, g, b] = rgb.map(|v| v as f64 / 255.0);
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let delta = max - min;
    let hue = if delta == 0.0 {
        0.0
    } else if max == r {
        60.0 * ((g - b) / delta).rem_euclid(6.0)
    } else if max == g {
        60.0 * ((b - r) / delta + 2.0)
    } else {
        60.0 * ((r - g) / delta + 4.0)
    };
    let sat = if max == 0.0 { 0.0 } else { delta / max };
    (hue.rem_euclid(360.0), sat, max)
}

/// A normalized joint histogram over quantized HSV.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    bins: usize,
    values: Vec<f64>,
}

impl Histogram {
    pub fn uniform(bins: usize) -> Self {
        let n = bins * bins * bins;
        Histogram {
            bins,
            values: vec![1.0 / n as f64; n],
        }
    }

    /// Normalizes raw non-negative counts. Fails when all are zero.
    pub fn from_counts(bins: usize, counts: Vec<f64>) -> Result<Self> {
        if counts.len() != bins * bins * bins {
            return Err(Error::InvalidArgument(format!(
                "expected {} histogram bins, got {}",
                bins * bins * bins,
                counts.len()
            )));
        }
        if counts.iter().any(|&c| !(c >= 0.0) || !c.is_finite()) {
            return Err(Error::InvalidArgument("histogram counts must be finite and non-negative".into()));
        }
        let total: f64 = counts.iter().sum();
        if total <= 0.0 {
            return Err(Error::InvalidArgument("histogram has no mass".into()));
        }
        Ok(Histogram {
            bins,
            values: counts.into_iter().map(|c| c / total).collect(),
        })
    }

    pub fn bins_per_channel(&self) -> usize {
        self.bins
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn index_of(&self, rgb: [u8; 3]) -> usize {
        bin_index(rgb, self.bins)
    }

    pub fn get(&self, rgb: [u8; 3]) -> f64 {
        self.values[self.index_of(rgb)]
    }

    /// `self * (1 - rate) + other * rate`, renormalized against drift.
    pub fn blend(&self, other: &Histogram, rate: f64) -> Histogram {
        let mut values: Vec<f64> = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a * (1.0 - rate) + b * rate)
            .collect();
        let total: f64 = values.iter().sum();
        values.iter_mut().for_each(|v| *v /= total);
        Histogram { bins: self.bins, values }
    }
}

pub fn bin_index(rgb: [u8; 3], bins: usize) -> usize {
    let (h, s, v) = rgb_to_hsv(rgb);
    let q = |x: f64| ((x * bins as f64) as usize).min(bins - 1);
    (q(h / 360.0) * bins + q(s)) * bins + q(v)
}

/// Integer pixel rectangle `(left, top, right, bottom)` covered by `region`,
/// exclusive on the right and bottom.
fn pixel_rect(region: &BBox) -> (i64, i64, i64, i64) {
    let left = region.x.round() as i64;
    let top = region.y.round() as i64;
    let right = (region.x + region.width).round() as i64;
    let bottom = (region.y + region.height).round() as i64;
    (left, top, right.max(left + 1), bottom.max(top + 1))
}

fn clip_rect(image: &RgbImage, rect: (i64, i64, i64, i64)) -> Option<(u32, u32, u32, u32)> {
    let (l, t, r, b) = rect;
    let l = l.max(0);
    let t = t.max(0);
    let r = r.min(image.width() as i64);
    let b = b.min(image.height() as i64);
    (r > l && b > t).then_some((l as u32, t as u32, r as u32, b as u32))
}

fn count_pixels(image: &RgbImage, rect: (u32, u32, u32, u32), exclude: Option<(i64, i64, i64, i64)>, bins: usize) -> Vec<f64> {
    let mut counts = vec![0.0; bins * bins * bins];
    let (l, t, r, b) = rect;
    for y in t..b {
        for x in l..r {
            if let Some((el, et, er, eb)) = exclude {
                let (xi, yi) = (x as i64, y as i64);
                if xi >= el && xi < er && yi >= et && yi < eb {
                    continue;
                }
            }
            counts[bin_index(image.get_pixel(x, y).0, bins)] += 1.0;
        }
    }
    counts
}

/// Normalized HSV histogram of the pixels of `region` that fall inside the image.
pub fn build_histogram(image: &RgbImage, region: &BBox, bins: usize) -> Result<Histogram> {
    if bins == 0 {
        return Err(Error::InvalidArgument("bins must be positive".into()));
    }
    let rect = clip_rect(image, pixel_rect(region))
        .ok_or_else(|| Error::InvalidArgument(format!("region {region} does not intersect the image")))?;
    Histogram::from_counts(bins, count_pixels(image, rect, None, bins))
}

/// Histogram of the ring between `inner` and `inner` scaled by `factor`
/// about its center. `None` if the ring has no pixels inside the image.
pub fn surround_histogram(image: &RgbImage, inner: &BBox, factor: f64, bins: usize) -> Option<Histogram> {
    let outer = inner.scaled_about_center(factor);
    let rect = clip_rect(image, pixel_rect(&outer))?;
    let counts = count_pixels(image, rect, Some(pixel_rect(inner)), bins);
    Histogram::from_counts(bins, counts).ok()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ColorModel {
    pub fg_hist: Histogram,
    pub bg_hist: Histogram,
    pub prior_fg: f64,
}

impl ColorModel {
    /// Foreground from `target`, background from its surround annulus.
    pub fn from_image(image: &RgbImage, target: &BBox, params: &ColorParams) -> Result<Self> {
        let fg_hist = build_histogram(image, target, params.bins)?;
        let bg_hist = surround_histogram(image, target, params.surround_factor, params.bins)
            .unwrap_or_else(|| Histogram::uniform(params.bins));
        Ok(ColorModel {
            fg_hist,
            bg_hist,
            prior_fg: 0.5,
        })
    }

    pub fn with_prior(mut self, prior_fg: f64) -> Self {
        self.prior_fg = prior_fg.clamp(1e-6, 1.0 - 1e-6);
        self
    }

    pub fn posterior(&self, rgb: [u8; 3]) -> f64 {
        let idx = self.fg_hist.index_of(rgb);
        let f = self.prior_fg * self.fg_hist.values[idx];
        let b = (1.0 - self.prior_fg) * self.bg_hist.values[idx];
        if f + b > 0.0 {
            f / (f + b)
        } else {
            self.prior_fg
        }
    }
}

/// Per-pixel foreground posterior over `region` (row-major, replicated at the
/// image border). The output is `round(height) x round(width)`.
pub fn backproject(image: &RgbImage, region: &BBox, model: &ColorModel) -> Array2<f64> {
    let (l, t, r, b) = pixel_rect(region);
    let (iw, ih) = (image.width() as i64, image.height() as i64);
    // One Bayes evaluation per histogram bin.
    let table: Vec<f64> = (0..model.fg_hist.values.len())
        .map(|i| {
            let f = model.prior_fg * model.fg_hist.values[i];
            let bg = (1.0 - model.prior_fg) * model.bg_hist.values[i];
            if f + bg > 0.0 {
                f / (f + bg)
            } else {
                model.prior_fg
            }
        })
        .collect();
    let bins = model.fg_hist.bins;
    Array2::from_shape_fn(((b - t) as usize, (r - l) as usize), |(y, x)| {
        let px = (l + x as i64).clamp(0, iw - 1) as u32;
        let py = (t + y as i64).clamp(0, ih - 1) as u32;
        table[bin_index(image.get_pixel(px, py).0, bins)]
    })
}

/// Iterated smoothing: each pass replaces a pixel by half itself plus half
/// the mean of its 4-neighborhood (border replicated).
pub fn regularize(posterior: &Array2<f64>, iterations: usize) -> Array2<f64> {
    let (h, w) = posterior.dim();
    let mut current = posterior.clone();
    let mut next = Array2::zeros((h, w));
    for _ in 0..iterations {
        for y in 0..h {
            for x in 0..w {
                let up = current[[y.saturating_sub(1), x]];
                let down = current[[(y + 1).min(h - 1), x]];
                let left = current[[y, x.saturating_sub(1)]];
                let right = current[[y, (x + 1).min(w - 1)]];
                let v = 0.5 * current[[y, x]] + 0.125 * (up + down + left + right);
                next[[y, x]] = v.clamp(0.0, 1.0);
            }
        }
        std::mem::swap(&mut current, &mut next);
    }
    current
}

/// Anisotropic total variation: sum of absolute horizontal and vertical differences.
pub fn total_variation(field: &Array2<f64>) -> f64 {
    let (h, w) = field.dim();
    let mut tv = 0.0;
    for y in 0..h {
        for x in 0..w {
            if x + 1 < w {
                tv += (field[[y, x + 1]] - field[[y, x]]).abs();
            }
            if y + 1 < h {
                tv += (field[[y + 1, x]] - field[[y, x]]).abs();
            }
        }
    }
    tv
}

/// `0.1` when the segmented area is plausible relative to the previous object
/// size, otherwise `1.0`, which switches the color cue off.
pub fn informativeness_with(fg_count: usize, prev_size: f64, alpha_min: f64, alpha_max: f64) -> Result<f64> {
    if !(prev_size > 0.0) {
        return Err(Error::InvalidArgument("previous object size must be positive".into()));
    }
    let ratio = fg_count as f64 / prev_size;
    Ok(if alpha_min < ratio && ratio < alpha_max { 0.1 } else { 1.0 })
}

pub fn informativeness(fg_count: usize, prev_size: usize) -> Result<f64> {
    let p = ColorParams::default();
    informativeness_with(fg_count, prev_size as f64, p.alpha_min, p.alpha_max)
}

/// `p(f|x) (1 - alpha) + alpha`.
pub fn color_probability(posterior: &Array2<f64>, alpha_col: f64) -> Array2<f64> {
    posterior.mapv(|p| p * (1.0 - alpha_col) + alpha_col)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SegmentationResult {
    pub posterior: Array2<f64>,
    pub mask: Array2<bool>,
    pub fg_count: usize,
    pub alpha_col: f64,
}

impl SegmentationResult {
    pub fn informative(&self) -> bool {
        self.alpha_col < 1.0
    }
}

/// Backprojects over `search`, smooths, thresholds and applies the
/// informativeness test. The prior is `object area / search area`.
pub fn segment(
    image: &RgbImage,
    search: &BBox,
    object: &BBox,
    model: &ColorModel,
    prev_size: f64,
    params: &ColorParams,
) -> Result<SegmentationResult> {
    let prior = (object.area() / search.area()).clamp(1e-6, 1.0 - 1e-6);
    let model = model.clone().with_prior(prior);
    let posterior = regularize(&backproject(image, search, &model), params.regularize_iterations);
    let mask = posterior.mapv(|p| p > MASK_THRESHOLD);
    let fg_count = mask.iter().filter(|&&m| m).count();
    let alpha_col = informativeness_with(fg_count, prev_size, params.alpha_min, params.alpha_max)?;
    Ok(SegmentationResult {
        posterior,
        mask,
        fg_count,
        alpha_col,
    })
}

/// Blends the foreground histogram towards `fg_region` and the background
/// towards its surround. A closed gate leaves the model untouched.
pub fn update_model(
    model: &ColorModel,
    fg_region: &BBox,
    surround_factor: f64,
    image: &RgbImage,
    rate: f64,
    gate: bool,
) -> Result<ColorModel> {
    if !(0.0..=1.0).contains(&rate) {
        return Err(Error::InvalidArgument(format!("histogram rate {rate} outside [0, 1]")));
    }
    if !(surround_factor > 1.0) {
        return Err(Error::InvalidArgument(format!("surround factor must exceed 1, got {surround_factor}")));
    }
    if !gate || rate == 0.0 {
        return Ok(model.clone());
    }
    let bins = model.fg_hist.bins;
    let Ok(fresh_fg) = build_histogram(image, fg_region, bins) else {
        return Ok(model.clone());
    };
    let fg_hist = if rate == 1.0 { fresh_fg } else { model.fg_hist.blend(&fresh_fg, rate) };
    let bg_hist = match surround_histogram(image, fg_region, surround_factor, bins) {
        Some(h) if rate == 1.0 => h,
        Some(h) => model.bg_hist.blend(&h, rate),
        None => model.bg_hist.clone(),
    };
    Ok(ColorModel {
        fg_hist,
        bg_hist,
        prior_fg: model.prior_fg,
    })
}
