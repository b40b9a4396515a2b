use serde::Serialize;

use crate::geometry::{BBox, Vec2};
use crate::{Error, Result};

/// `p -> scale * R(rotation) * p + translation`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Similarity {
    pub scale: f64,
    /// Radians, counter-clockwise in image axes.
    pub rotation: f64,
    pub translation: Vec2,
}

impl Similarity {
    pub const IDENTITY: Similarity = Similarity {
        scale: 1.0,
        rotation: 0.0,
        translation: Vec2::ZERO,
    };

    pub fn translation(by: Vec2) -> Self {
        Similarity {
            translation: by,
            ..Self::IDENTITY
        }
    }

    pub fn apply(&self, p: Vec2) -> Vec2 {
        let (s, c) = self.rotation.sin_cos();
        Vec2::new(
            self.scale * (c * p.x - s * p.y) + self.translation.x,
            self.scale * (s * p.x + c * p.y) + self.translation.y,
        )
    }

    /// Moves the box center through the transform and scales its size.
    /// Rotation is not representable on an axis-aligned box and is dropped.
    pub fn apply_to_box(&self, bbox: &BBox) -> BBox {
        BBox::from_center(self.apply(bbox.center()), bbox.width * self.scale, bbox.height * self.scale)
    }
}

fn centroid(points: &[Vec2]) -> Vec2 {
    points.iter().fold(Vec2::ZERO, |acc, &p| acc + p) * (1.0 / points.len() as f64)
}

/// Least-squares similarity transform taking `prev` onto `new`. When `prev`
/// has no spread the fit falls back to the centroid translation.
pub fn fit_transform(prev: &[Vec2], new: &[Vec2]) -> Result<Similarity> {
    if prev.len() != new.len() || prev.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "point sets must be non-empty and equal in size ({} vs {})",
            prev.len(),
            new.len()
        )));
    }
    if prev.iter().chain(new).any(|p| !p.is_finite()) {
        return Err(Error::InvalidArgument("non-finite point".into()));
    }
    let (cp, cn) = (centroid(prev), centroid(new));
    let mut spread = 0.0;
    let (mut a, mut b) = (0.0, 0.0);
    for (&p, &q) in prev.iter().zip(new) {
        let (p, q) = (p - cp, q - cn);
        spread += p.norm_sq();
        a += p.dot(q);
        b += p.x * q.y - p.y * q.x;
    }
    if spread <= 1e-12 * (1.0 + cp.norm_sq()) {
        return Ok(Similarity::translation(cn - cp));
    }
    let rotation = b.atan2(a);
    let scale = a.hypot(b) / spread;
    let rotated = Similarity {
        scale,
        rotation,
        translation: Vec2::ZERO,
    }
    .apply(cp);
    Ok(Similarity {
        scale,
        rotation,
        translation: cn - rotated,
    })
}

/// Sum of squared residuals of `t(prev)` against `new`.
pub fn residual(t: &Similarity, prev: &[Vec2], new: &[Vec2]) -> f64 {
    prev.iter().zip(new).map(|(&p, &q)| (t.apply(p) - q).norm_sq()).sum()
}
