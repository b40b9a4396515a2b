//! Kernelized correlation filters over HOG and grayscale features.

mod features;
mod fft;
mod hog;
mod kcf;
mod stats;

pub use features::{cell_grid, cosine_window, extract_features, features_from_pixels, hann, FeaturePatch, CELL_SIZE};
pub use hog::{hog, HOG_CHANNELS};
pub use kcf::{gaussian_labels, kernel_correlation, train, Filter, FilterParams};
pub use stats::{argmax, refine_peak, response_at, response_stats, subpixel_peak, wrap_shift, ResponseStats};
