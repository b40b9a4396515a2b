//! Spring-system dual of the part constellation.
//!
//! Dynamic nodes are part positions, anchors are the fixed image locations
//! where each part's filter responds best. Dynamic springs connect pairs of
//! parts with a nominal length; static springs tie a part to its anchor with
//! zero rest length. The energy
//!
//! ```text
//! E = 1/2 * sum_i k_i |x_i - a_i|^2 + sum_(i,j) k_ij (mu_ij - |x_i - x_j|)^2
//! ```
//!
//! is the negative log posterior of the constellation, so minimizing it is MAP
//! inference. [`solve_ida`] is the closed-form per-axis iteration and
//! [`solve_cgd`] the nonlinear conjugate gradient baseline.

mod bench;
mod cgd;
mod ida;
mod linear;
mod random;

use serde::Serialize;

use crate::geometry::Vec2;
use crate::{Error, Result};

pub use bench::{convergence_experiment, BenchConfig, BenchRow, BenchmarkTable, TrialRecord};
pub use cgd::{solve_cgd, CgdOptions};
pub use ida::{solve_ida, IdaOptions};
pub use linear::{solve_1d, AxisSolver};
pub use random::{generate_random_system, generate_random_system_with};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DynamicSpring {
    pub a: usize,
    pub b: usize,
    pub stiffness: f64,
    pub rest_length: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StaticSpring {
    pub node: usize,
    pub anchor: usize,
    pub stiffness: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpringSystem {
    nodes: Vec<Vec2>,
    anchors: Vec<Vec2>,
    dynamic_springs: Vec<DynamicSpring>,
    static_springs: Vec<StaticSpring>,
}

impl SpringSystem {
    pub fn new(
        nodes: Vec<Vec2>,
        anchors: Vec<Vec2>,
        dynamic_springs: Vec<DynamicSpring>,
        static_springs: Vec<StaticSpring>,
    ) -> Result<Self> {
        let system = SpringSystem {
            nodes,
            anchors,
            dynamic_springs,
            static_springs,
        };
        system.validate()?;
        Ok(system)
    }

    fn validate(&self) -> Result<()> {
        let n = self.nodes.len();
        let bad = |msg: String| Err(Error::InvalidSystem(msg));
        if n == 0 {
            return bad("no dynamic nodes".into());
        }
        if let Some(i) = self.nodes.iter().position(|p| !p.is_finite()) {
            return bad(format!("node {i} has a non-finite position"));
        }
        if let Some(i) = self.anchors.iter().position(|p| !p.is_finite()) {
            return bad(format!("anchor {i} has a non-finite position"));
        }
        let mut incident = vec![false; n];
        let mut seen = std::collections::HashSet::new();
        for (s, spring) in self.dynamic_springs.iter().enumerate() {
            if spring.a >= n || spring.b >= n {
                return bad(format!("dynamic spring {s} references a missing node"));
            }
            if spring.a == spring.b {
                return bad(format!("dynamic spring {s} connects node {} to itself", spring.a));
            }
            if !(spring.stiffness >= 0.0 && spring.stiffness.is_finite()) {
                return bad(format!("dynamic spring {s} has invalid stiffness {}", spring.stiffness));
            }
            if !(spring.rest_length >= 0.0 && spring.rest_length.is_finite()) {
                return bad(format!(
                    "dynamic spring {s} has invalid nominal length {}",
                    spring.rest_length
                ));
            }
            let key = (spring.a.min(spring.b), spring.a.max(spring.b));
            if !seen.insert(key) {
                return bad(format!("duplicate dynamic spring between {} and {}", key.0, key.1));
            }
            incident[spring.a] = true;
            incident[spring.b] = true;
        }
        for (s, spring) in self.static_springs.iter().enumerate() {
            if spring.node >= n {
                return bad(format!("static spring {s} references missing node {}", spring.node));
            }
            if spring.anchor >= self.anchors.len() {
                return bad(format!("static spring {s} references missing anchor {}", spring.anchor));
            }
            if !(spring.stiffness >= 0.0 && spring.stiffness.is_finite()) {
                return bad(format!("static spring {s} has invalid stiffness {}", spring.stiffness));
            }
            incident[spring.node] = true;
        }
        if let Some(i) = incident.iter().position(|&b| !b) {
            return bad(format!("node {i} has no incident spring"));
        }
        Ok(())
    }

    pub fn nodes(&self) -> &[Vec2] {
        &self.nodes
    }

    pub fn anchors(&self) -> &[Vec2] {
        &self.anchors
    }

    pub fn dynamic_springs(&self) -> &[DynamicSpring] {
        &self.dynamic_springs
    }

    pub fn static_springs(&self) -> &[StaticSpring] {
        &self.static_springs
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn num_springs(&self) -> usize {
        self.dynamic_springs.len() + self.static_springs.len()
    }

    /// Same topology and stiffness, different dynamic node positions.
    pub fn with_nodes(&self, nodes: Vec<Vec2>) -> Result<Self> {
        if nodes.len() != self.nodes.len() {
            return Err(Error::InvalidArgument(format!(
                "expected {} node positions, got {}",
                self.nodes.len(),
                nodes.len()
            )));
        }
        SpringSystem::new(
            nodes,
            self.anchors.clone(),
            self.dynamic_springs.clone(),
            self.static_springs.clone(),
        )
    }

    /// Translate every node and anchor by `offset`.
    pub fn translated(&self, offset: Vec2) -> Self {
        SpringSystem {
            nodes: self.nodes.iter().map(|&p| p + offset).collect(),
            anchors: self.anchors.iter().map(|&p| p + offset).collect(),
            dynamic_springs: self.dynamic_springs.clone(),
            static_springs: self.static_springs.clone(),
        }
    }

    pub fn max_stiffness(&self) -> f64 {
        self.dynamic_springs
            .iter()
            .map(|s| s.stiffness)
            .chain(self.static_springs.iter().map(|s| s.stiffness))
            .fold(0.0, f64::max)
    }

    pub fn energy(&self) -> f64 {
        energy_at(self, &self.nodes)
    }
}

/// Energy of `system` with its dynamic nodes placed at `positions`.
pub fn energy_at(system: &SpringSystem, positions: &[Vec2]) -> f64 {
    let statics: f64 = system
        .static_springs
        .iter()
        .map(|s| 0.5 * s.stiffness * (positions[s.node] - system.anchors[s.anchor]).norm_sq())
        .sum();
    let dynamics: f64 = system
        .dynamic_springs
        .iter()
        .map(|s| {
            let stretch = s.rest_length - (positions[s.a] - positions[s.b]).norm();
            s.stiffness * stretch * stretch
        })
        .sum();
    statics + dynamics
}

/// Analytic gradient of [`energy_at`] with respect to each dynamic node.
///
/// A dynamic spring whose endpoints coincide contributes a zero subgradient.
pub fn energy_gradient(system: &SpringSystem, positions: &[Vec2]) -> Vec<Vec2> {
    let mut grad = vec![Vec2::ZERO; positions.len()];
    for s in &system.static_springs {
        grad[s.node] += (positions[s.node] - system.anchors[s.anchor]) * s.stiffness;
    }
    for s in &system.dynamic_springs {
        let d = positions[s.a] - positions[s.b];
        let len = d.norm();
        if len > 0.0 {
            let g = d * (2.0 * s.stiffness * (len - s.rest_length) / len);
            grad[s.a] += g;
            grad[s.b] += -g;
        }
    }
    grad
}

/// Node-spring incidence matrix. Rows are dynamic springs followed by static
/// springs; columns are dynamic nodes followed by anchors. Each row holds `+1`
/// at its first endpoint and `-1` at its second.
#[derive(Debug, Clone, PartialEq)]
pub struct ConnectivityMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<i8>,
}

impl ConnectivityMatrix {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, row: usize, col: usize) -> i8 {
        self.entries[row * self.cols + col]
    }

    pub fn row(&self, row: usize) -> &[i8] {
        &self.entries[row * self.cols..(row + 1) * self.cols]
    }

    /// `B^T K (L - B x)` for one axis: the force on every node (dynamic then
    /// anchor) when springs with stiffness `k` and signed 1D lengths `lengths`
    /// sit at node coordinates `x`.
    pub fn node_forces(&self, x: &[f64], stiffness: &[f64], lengths: &[f64]) -> Vec<f64> {
        let mut forces = vec![0.0; self.cols];
        for r in 0..self.rows {
            let row = self.row(r);
            let stretch: f64 = row.iter().zip(x).map(|(&b, &xi)| b as f64 * xi).sum::<f64>() - lengths[r];
            let f = -stiffness[r] * stretch;
            for (c, &b) in row.iter().enumerate() {
                if b != 0 {
                    forces[c] += b as f64 * f;
                }
            }
        }
        forces
    }
}

pub fn build_connectivity(system: &SpringSystem) -> Result<ConnectivityMatrix> {
    let n_dyn = system.nodes.len();
    let cols = n_dyn + system.anchors.len();
    let rows = system.num_springs();
    let mut entries = vec![0i8; rows * cols];
    let mut set = |r: usize, first: usize, second: usize| -> Result<()> {
        if first >= cols || second >= cols || first == second {
            return Err(Error::InvalidSystem(format!(
                "spring {r} has invalid endpoints ({first}, {second})"
            )));
        }
        entries[r * cols + first] = 1;
        entries[r * cols + second] = -1;
        Ok(())
    };
    for (r, s) in system.dynamic_springs.iter().enumerate() {
        set(r, s.a, s.b)?;
    }
    let offset = system.dynamic_springs.len();
    for (r, s) in system.static_springs.iter().enumerate() {
        set(offset + r, s.node, n_dyn + s.anchor)?;
    }
    Ok(ConnectivityMatrix {
        rows,
        cols,
        entries,
    })
}

/// Outcome of a spring-system solve.
#[derive(Debug, Clone, Serialize)]
pub struct SolveReport {
    pub final_positions: Vec<Vec2>,
    pub iterations: usize,
    pub initial_energy: f64,
    pub final_energy: f64,
    pub converged: bool,
    pub wall_time: f64,
    /// Energy before the first iteration followed by the energy after each one.
    pub energy_trace: Vec<f64>,
}
