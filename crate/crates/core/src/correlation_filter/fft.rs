//! 2D FFT over row-major arrays, built from rustfft 1D transforms.

use std::cell::RefCell;

use ndarray::Array2;
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn transform(data: &mut Array2<Complex64>, inverse: bool) {
    let (h, w) = data.dim();
    PLANNER.with(|planner| {
        let mut planner = planner.borrow_mut();
        let (row_fft, col_fft) = if inverse {
            (planner.plan_fft_inverse(w), planner.plan_fft_inverse(h))
        } else {
            (planner.plan_fft_forward(w), planner.plan_fft_forward(h))
        };
        for mut row in data.rows_mut() {
            let slice = row.as_slice_mut().expect("standard layout");
            row_fft.process(slice);
        }
        let mut column = vec![Complex64::new(0.0, 0.0); h];
        for c in 0..w {
            for r in 0..h {
                column[r] = data[[r, c]];
            }
            col_fft.process(&mut column);
            for r in 0..h {
                data[[r, c]] = column[r];
            }
        }
    });
    if inverse {
        let scale = 1.0 / (h * w) as f64;
        data.mapv_inplace(|v| v * scale);
    }
}

pub fn fft2_real(input: &Array2<f64>) -> Array2<Complex64> {
    let mut data = input.mapv(|v| Complex64::new(v, 0.0));
    transform(&mut data, false);
    data
}

/// Normalized inverse transform.
pub fn ifft2(input: &Array2<Complex64>) -> Array2<Complex64> {
    let mut data = input.as_standard_layout().to_owned();
    transform(&mut data, true);
    data
}
