//! Deformable-parts correlation filter tracking.
//!
//! The object is modelled at two levels: a coarse root correlation filter
//! combined with a global color model, and a fully connected constellation of
//! part filters whose MAP configuration is found by minimizing the energy of
//! an equivalent spring system.

// Negated comparisons are used on purpose so that NaN inputs are rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod clock;
mod error;

pub mod correlation_filter;
pub mod evaluation;
pub mod geometry;
pub mod segmentation;
pub mod imaging;
pub mod spring_system;
pub mod tracker;
#[cfg(test)]
mod properties;

pub use error::{Error, Result};
pub use geometry::{BBox, Vec2};
