use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::correlation_filter::{FilterParams, CELL_SIZE};
use crate::segmentation::ColorParams;
use crate::spring_system::IdaOptions;
use crate::{Error, Result};

/// Which part pairs are joined by springs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Topology {
    /// Every pair.
    #[default]
    Full,
    /// Grid neighbors; a ring for 2x2.
    Local,
    /// Every part linked to the first one.
    Star,
}

/// How the object box is split into parts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum PartLayout {
    /// Four quadrants.
    #[default]
    #[serde(rename = "2x2")]
    Grid2x2,
    /// Nine non-overlapping thirds.
    #[serde(rename = "3x3")]
    Grid3x3,
    /// Nine half-size parts on a quarter-step grid.
    #[serde(rename = "3x3ov")]
    Grid3x3Overlap,
}

/// Tracker variant: the full two-layer model or the coarse layer alone.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum TrackerMode {
    #[default]
    Full,
    CoarseOnly,
    CoarseNoColor,
}

macro_rules! text_enum {
    ($ty:ty, $($name:literal => $variant:expr),+ $(,)?) => {
        impl FromStr for $ty {
            type Err = Error;
            fn from_str(s: &str) -> Result<Self> {
                match s.trim().to_ascii_lowercase().as_str() {
                    $($name => Ok($variant),)+
                    other => Err(Error::Parse(format!(
                        concat!("unknown ", stringify!($ty), " '{}', expected one of: ", $($name, " "),+),
                        other
                    ))),
                }
            }
        }

        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                $(if *self == $variant { return f.write_str($name); })+
                unreachable!()
            }
        }
    };
}

text_enum!(Topology, "full" => Topology::Full, "local" => Topology::Local, "star" => Topology::Star);
text_enum!(
    PartLayout,
    "2x2" => PartLayout::Grid2x2,
    "3x3" => PartLayout::Grid3x3,
    "3x3ov" => PartLayout::Grid3x3Overlap,
);
text_enum!(
    TrackerMode,
    "full" => TrackerMode::Full,
    "coarse-only" => TrackerMode::CoarseOnly,
    "coarse-no-color" => TrackerMode::CoarseNoColor,
);

/// Every tunable of the tracker. Missing keys in a config file take the
/// defaults below.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrackerConfig {
    pub mode: TrackerMode,
    pub topology: Topology,
    pub parts: PartLayout,
    /// Nominal spring length update rate.
    pub alpha_spr: f64,
    /// Surround enlargement for the background histogram.
    pub alpha_sur: f64,
    /// Histogram update rate.
    pub alpha_hist: f64,
    pub alpha_min: f64,
    pub alpha_max: f64,
    pub hsv_bins: usize,
    pub regularize_iterations: usize,
    pub lambda: f64,
    pub kernel_sigma: f64,
    pub learn_rate: f64,
    pub label_sigma_factor: f64,
    pub cell_size: usize,
    /// Search region size relative to the box (root) or part.
    pub padding: f64,
    /// Lower bound on response variance, px².
    pub sigma2_floor: f64,
    /// A part is updated only if its weight reaches this fraction of the best.
    pub part_gate_ratio: f64,
    /// ... and at least this fraction of its pixels are foreground.
    pub part_mask_fraction: f64,
    pub ida_tol: f64,
    pub ida_max_iter: usize,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        let filter = FilterParams::default();
        let color = ColorParams::default();
        let ida = IdaOptions::default();
        TrackerConfig {
            mode: TrackerMode::Full,
            topology: Topology::Full,
            parts: PartLayout::Grid2x2,
            alpha_spr: 0.95,
            alpha_sur: color.surround_factor,
            alpha_hist: color.hist_rate,
            alpha_min: color.alpha_min,
            alpha_max: color.alpha_max,
            hsv_bins: color.bins,
            regularize_iterations: color.regularize_iterations,
            lambda: filter.lambda,
            kernel_sigma: filter.kernel_sigma,
            learn_rate: filter.learn_rate,
            label_sigma_factor: filter.label_sigma_factor,
            cell_size: CELL_SIZE,
            padding: 2.0,
            sigma2_floor: 0.25,
            part_gate_ratio: 0.5,
            part_mask_fraction: 0.2,
            ida_tol: ida.tol,
            ida_max_iter: ida.max_iter,
        }
    }
}

impl TrackerConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let config: TrackerConfig = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let unit = |name: &str, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(Error::InvalidArgument(format!("{name} = {v} must lie in [0, 1]")))
            }
        };
        unit("alpha_spr", self.alpha_spr)?;
        unit("alpha_hist", self.alpha_hist)?;
        unit("learn_rate", self.learn_rate)?;
        unit("part_gate_ratio", self.part_gate_ratio)?;
        unit("part_mask_fraction", self.part_mask_fraction)?;
        let positive = [
            ("lambda", self.lambda),
            ("kernel_sigma", self.kernel_sigma),
            ("label_sigma_factor", self.label_sigma_factor),
            ("sigma2_floor", self.sigma2_floor),
            ("ida_tol", self.ida_tol),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidArgument(format!("{name} = {v} must be positive")));
            }
        }
        if !(self.alpha_sur > 1.0) {
            return Err(Error::InvalidArgument("alpha_sur must exceed 1".into()));
        }
        if !(self.padding >= 1.0) {
            return Err(Error::InvalidArgument("padding must be at least 1".into()));
        }
        if !(0.0 <= self.alpha_min && self.alpha_min < self.alpha_max) {
            return Err(Error::InvalidArgument("need 0 <= alpha_min < alpha_max".into()));
        }
        if self.hsv_bins == 0 || self.cell_size == 0 || self.ida_max_iter == 0 {
            return Err(Error::InvalidArgument("hsv_bins, cell_size and ida_max_iter must be positive".into()));
        }
        Ok(())
    }

    pub fn filter_params(&self) -> FilterParams {
        FilterParams {
            lambda: self.lambda,
            kernel_sigma: self.kernel_sigma,
            learn_rate: self.learn_rate,
            label_sigma_factor: self.label_sigma_factor,
        }
    }

    pub fn color_params(&self) -> ColorParams {
        ColorParams {
            bins: self.hsv_bins,
            alpha_min: self.alpha_min,
            alpha_max: self.alpha_max,
            surround_factor: self.alpha_sur,
            hist_rate: self.alpha_hist,
            regularize_iterations: self.regularize_iterations,
        }
    }

    pub fn ida_options(&self) -> IdaOptions {
        IdaOptions {
            tol: self.ida_tol,
            max_iter: self.ida_max_iter,
        }
    }
}
