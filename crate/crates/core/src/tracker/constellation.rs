use serde::Serialize;

use super::config::{PartLayout, Topology};
use crate::correlation_filter::Filter;
use crate::geometry::{BBox, Vec2};

#[derive(Debug, Clone)]
pub struct Part {
    pub index: usize,
    pub position: Vec2,
    /// `(width, height)` in pixels, fixed for the whole track.
    pub size: (f64, f64),
    pub filter: Filter,
}

impl Part {
    pub fn region(&self) -> BBox {
        BBox::from_center(self.position, self.size.0, self.size.1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Link {
    pub a: usize,
    pub b: usize,
    /// Preferred distance between the two parts.
    pub mu: f64,
}

#[derive(Debug, Clone)]
pub struct Constellation {
    pub parts: Vec<Part>,
    pub links: Vec<Link>,
    pub spring_rate: f64,
}

impl Constellation {
    pub fn positions(&self) -> Vec<Vec2> {
        self.parts.iter().map(|p| p.position).collect()
    }

    /// `mu <- mu (1 - rate) + |d| rate` for every link.
    pub fn update_lengths(&mut self, positions: &[Vec2]) {
        let rate = self.spring_rate;
        for link in &mut self.links {
            let d = positions[link.a].distance(positions[link.b]);
            link.mu = link.mu * (1.0 - rate) + d * rate;
        }
    }
}

/// Grid dimension of a layout.
pub fn layout_side(layout: PartLayout) -> usize {
    match layout {
        PartLayout::Grid2x2 => 2,
        PartLayout::Grid3x3 | PartLayout::Grid3x3Overlap => 3,
    }
}

/// Part centers and size for `layout` inside `bbox`, in row-major grid order.
pub fn part_layout(bbox: &BBox, layout: PartLayout) -> (Vec<Vec2>, (f64, f64)) {
    let n = layout_side(layout);
    let (size, step, offset) = match layout {
        PartLayout::Grid2x2 | PartLayout::Grid3x3 => {
            let size = (bbox.width / n as f64, bbox.height / n as f64);
            (size, size, (size.0 / 2.0, size.1 / 2.0))
        }
        PartLayout::Grid3x3Overlap => {
            let size = (bbox.width / 2.0, bbox.height / 2.0);
            let step = (bbox.width / 4.0, bbox.height / 4.0);
            (size, step, step)
        }
    };
    let centers = (0..n)
        .flat_map(|r| (0..n).map(move |c| (r, c)))
        .map(|(r, c)| Vec2::new(bbox.x + offset.0 + c as f64 * step.0, bbox.y + offset.1 + r as f64 * step.1))
        .collect();
    (centers, size)
}

/// Linked index pairs for `side x side` parts in row-major order.
pub fn topology_links(topology: Topology, side: usize) -> Vec<(usize, usize)> {
    let n = side * side;
    match topology {
        Topology::Full => (0..n).flat_map(|a| (a + 1..n).map(move |b| (a, b))).collect(),
        Topology::Star => (1..n).map(|b| (0, b)).collect(),
        Topology::Local if side == 2 => vec![(0, 1), (1, 3), (2, 3), (0, 2)],
        Topology::Local => {
            let mut links = Vec::new();
            for r in 0..side {
                for c in 0..side {
                    let i = r * side + c;
                    if c + 1 < side {
                        links.push((i, i + 1));
                    }
                    if r + 1 < side {
                        links.push((i, i + side));
                    }
                }
            }
            links
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadrant_geometry() {
        let (centers, size) = part_layout(&BBox::new(50.0, 50.0, 100.0, 100.0), PartLayout::Grid2x2);
        assert_eq!(size, (50.0, 50.0));
        let rel: Vec<_> = centers.iter().map(|c| (c.x - 50.0, c.y - 50.0)).collect();
        assert_eq!(rel, vec![(25.0, 25.0), (75.0, 25.0), (25.0, 75.0), (75.0, 75.0)]);
    }

    #[test]
    fn nine_part_layouts() {
        let b = BBox::new(0.0, 0.0, 90.0, 60.0);
        let (c, s) = part_layout(&b, PartLayout::Grid3x3);
        assert_eq!(s, (30.0, 20.0));
        assert_eq!(c[4], Vec2::new(45.0, 30.0));
        let (c, s) = part_layout(&b, PartLayout::Grid3x3Overlap);
        assert_eq!(s, (45.0, 30.0));
        assert_eq!(c[0], Vec2::new(22.5, 15.0));
        assert_eq!(c[8], Vec2::new(67.5, 45.0));
    }

    #[test]
    fn link_counts() {
        assert_eq!(topology_links(Topology::Full, 2).len(), 6);
        assert_eq!(topology_links(Topology::Star, 2).len(), 3);
        assert_eq!(topology_links(Topology::Local, 2).len(), 4);
        assert_eq!(topology_links(Topology::Full, 3).len(), 36);
        assert_eq!(topology_links(Topology::Local, 3).len(), 12);
        assert_eq!(topology_links(Topology::Star, 3).len(), 8);
    }
}
