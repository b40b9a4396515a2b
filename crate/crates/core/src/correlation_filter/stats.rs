use ndarray::Array2;

use crate::geometry::Vec2;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResponseStats {
    /// Sub-pixel peak in image coordinates.
    pub peak_pos: Vec2,
    pub peak_value: f64,
    /// Response-weighted mean squared distance from the peak, in pixels².
    pub weighted_variance: f64,
}

/// Signed circular offset of index `i` on a ring of length `n`, in `[-n/2, n/2)`.
pub fn wrap_shift(i: usize, n: usize) -> i64 {
    let i = i as i64;
    let n = n as i64;
    if i >= (n + 1) / 2 {
        i - n
    } else {
        i
    }
}

fn circular_delta(a: usize, b: usize, n: usize) -> f64 {
    let d = (a as i64 - b as i64).rem_euclid(n as i64);
    d.min(n as i64 - d) as f64
}

/// First strict maximum in row-major order.
pub fn argmax(response: &Array2<f64>) -> (usize, usize) {
    let mut best = (0, 0);
    let mut best_v = f64::NEG_INFINITY;
    for ((r, c), &v) in response.indexed_iter() {
        if v > best_v {
            best_v = v;
            best = (r, c);
        }
    }
    best
}

fn parabola_offset(left: f64, mid: f64, right: f64) -> f64 {
    let denom = left - 2.0 * mid + right;
    if denom >= 0.0 || !denom.is_finite() {
        return 0.0;
    }
    (0.5 * (left - right) / denom).clamp(-0.5, 0.5)
}

/// Peak shift in cells (sub-cell precision) relative to zero displacement.
pub fn subpixel_peak(response: &Array2<f64>) -> (f64, f64) {
    refine_peak(response, argmax(response))
}

/// Parabolic refinement of `response` around the integer cell `(pr, pc)`,
/// returned as a signed shift in cells.
pub fn refine_peak(response: &Array2<f64>, (pr, pc): (usize, usize)) -> (f64, f64) {
    let (rows, cols) = response.dim();
    let mid = response[[pr, pc]];
    let dy = if rows >= 3 {
        parabola_offset(response[[(pr + rows - 1) % rows, pc]], mid, response[[(pr + 1) % rows, pc]])
    } else {
        0.0
    };
    let dx = if cols >= 3 {
        parabola_offset(response[[pr, (pc + cols - 1) % cols]], mid, response[[pr, (pc + 1) % cols]])
    } else {
        0.0
    };
    (wrap_shift(pr, rows) as f64 + dy, wrap_shift(pc, cols) as f64 + dx)
}

/// Peak position, value and spread of a response map whose index `(0, 0)`
/// corresponds to `search_origin`. Negative responses carry no weight.
pub fn response_stats(response: &Array2<f64>, search_origin: Vec2, cell_size: usize) -> Result<ResponseStats> {
    let (rows, cols) = response.dim();
    if rows == 0 || cols == 0 {
        return Err(Error::InvalidArgument("empty response map".into()));
    }
    if response.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("response map contains non-finite values".into()));
    }
    let total: f64 = response.iter().map(|&v| v.max(0.0)).sum();
    if !(total > 0.0) {
        return Err(Error::Uninformative("response has no positive mass".into()));
    }
    let (pr, pc) = argmax(response);
    let cell = cell_size as f64;
    let mut variance = 0.0;
    for ((r, c), &v) in response.indexed_iter() {
        if v > 0.0 {
            let dy = circular_delta(r, pr, rows) * cell;
            let dx = circular_delta(c, pc, cols) * cell;
            variance += v / total * (dx * dx + dy * dy);
        }
    }
    let (sy, sx) = subpixel_peak(response);
    Ok(ResponseStats {
        peak_pos: search_origin + Vec2::new(sx * cell, sy * cell),
        peak_value: response[[pr, pc]],
        weighted_variance: variance,
    })
}

/// Bilinear sample of a circularly indexed response map at a shift given in cells.
pub fn response_at(response: &Array2<f64>, shift_rows: f64, shift_cols: f64) -> f64 {
    let (rows, cols) = response.dim();
    let r0 = shift_rows.floor();
    let c0 = shift_cols.floor();
    let (fr, fc) = (shift_rows - r0, shift_cols - c0);
    let idx = |v: f64, n: usize| (v as i64).rem_euclid(n as i64) as usize;
    let at = |r: f64, c: f64| response[[idx(r, rows), idx(c, cols)]];
    at(r0, c0) * (1.0 - fr) * (1.0 - fc)
        + at(r0 + 1.0, c0) * fr * (1.0 - fc)
        + at(r0, c0 + 1.0) * (1.0 - fr) * fc
        + at(r0 + 1.0, c0 + 1.0) * fr * fc
}
