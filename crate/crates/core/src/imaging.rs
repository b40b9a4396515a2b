//! Pixel access helpers shared by the feature and color code.

use image::RgbImage;
use ndarray::Array3;

/// Crops `height x width` pixels starting at integer `(left, top)`, with
/// out-of-image pixels replicated from the nearest border. Values are
/// scaled to `[0, 1]`.
pub fn crop_replicate(image: &RgbImage, left: i64, top: i64, width: usize, height: usize) -> Array3<f64> {
    let (iw, ih) = (image.width() as i64, image.height() as i64);
    Array3::from_shape_fn((height, width, 3), |(y, x, c)| {
        let px = (left + x as i64).clamp(0, iw - 1) as u32;
        let py = (top + y as i64).clamp(0, ih - 1) as u32;
        image.get_pixel(px, py)[c] as f64 / 255.0
    })
}

/// ITU-R 601 luma of an `h x w x 3` array.
pub fn luma(pixels: &Array3<f64>) -> ndarray::Array2<f64> {
    let (h, w, _) = pixels.dim();
    ndarray::Array2::from_shape_fn((h, w), |(y, x)| {
        0.299 * pixels[[y, x, 0]] + 0.587 * pixels[[y, x, 1]] + 0.114 * pixels[[y, x, 2]]
    })
}

/// Binary 8-bit PGM of `values`, mapped linearly from `[lo, hi]` to `[0, 255]`.
pub fn pgm_bytes(values: &ndarray::Array2<f64>, lo: f64, hi: f64) -> Vec<u8> {
    let (h, w) = values.dim();
    let mut out = format!("P5\n{w} {h}\n255\n").into_bytes();
    let span = if hi > lo { hi - lo } else { 1.0 };
    out.extend(values.iter().map(|&v| (((v - lo) / span).clamp(0.0, 1.0) * 255.0).round() as u8));
    out
}

/// Writes `values` as a PGM, stretched to the full gray range.
pub fn write_pgm_normalized(path: &std::path::Path, values: &ndarray::Array2<f64>) -> std::io::Result<()> {
    let (lo, hi) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    std::fs::write(path, pgm_bytes(values, lo, hi))
}

/// Writes probabilities in `[0, 1]` as a PGM scaled by 255.
pub fn write_pgm_unit(path: &std::path::Path, values: &ndarray::Array2<f64>) -> std::io::Result<()> {
    std::fs::write(path, pgm_bytes(values, 0.0, 1.0))
}

/// Inverse FFT shift for display: moves zero displacement to the center.
pub fn center_shift(values: &ndarray::Array2<f64>) -> ndarray::Array2<f64> {
    let (h, w) = values.dim();
    ndarray::Array2::from_shape_fn((h, w), |(r, c)| values[[(r + h.div_ceil(2)) % h, (c + w.div_ceil(2)) % w]])
}
