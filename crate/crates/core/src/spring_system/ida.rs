//! Iterative direct approach: split the 2D system into two 1D systems, solve
//! each in closed form, reassemble, repeat.

use super::linear::AxisSolver;
use super::{energy_at, SolveReport, SpringSystem};
use crate::clock::Stopwatch;
use crate::geometry::Vec2;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdaOptions {
    /// Stop once no node moves farther than this between iterations.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for IdaOptions {
    fn default() -> Self {
        IdaOptions {
            tol: 1e-3,
            max_iter: 100,
        }
    }
}

pub fn solve_ida(system: &SpringSystem, options: IdaOptions) -> Result<SolveReport> {
    if !(options.tol > 0.0) || options.max_iter == 0 {
        return Err(Error::InvalidArgument(format!(
            "tol must be positive and max_iter at least 1 (got {}, {})",
            options.tol, options.max_iter
        )));
    }
    let clock = Stopwatch::start();
    let solver = AxisSolver::new(system)?;
    let anchor_terms = [0, 1].map(|axis| {
        let coords: Vec<f64> = system.anchors().iter().map(|p| p.axis(axis)).collect();
        solver.anchor_term(&coords)
    });

    let springs = system.dynamic_springs();
    let n_springs = solver.num_springs();
    let mut directions: Vec<Vec2> = vec![Vec2::new(std::f64::consts::FRAC_1_SQRT_2, std::f64::consts::FRAC_1_SQRT_2); springs.len()];
    let mut positions = system.nodes().to_vec();
    let initial_energy = energy_at(system, &positions);
    let mut trace = vec![initial_energy];
    let mut lengths = [vec![0.0; n_springs], vec![0.0; n_springs]];
    let mut converged = false;
    let mut iterations = 0;

    while iterations < options.max_iter {
        iterations += 1;
        for (s, spring) in springs.iter().enumerate() {
            let d = positions[spring.a] - positions[spring.b];
            let len = d.norm();
            // coincident endpoints keep the previous direction
            if len > 0.0 {
                directions[s] = d * (1.0 / len);
            }
            lengths[0][s] = spring.rest_length * directions[s].x;
            lengths[1][s] = spring.rest_length * directions[s].y;
        }
        let xs = solver.solve_with_anchor_term(&anchor_terms[0], &lengths[0]);
        let ys = solver.solve_with_anchor_term(&anchor_terms[1], &lengths[1]);

        let mut max_step: f64 = 0.0;
        for (i, p) in positions.iter_mut().enumerate() {
            let next = Vec2::new(xs[i], ys[i]);
            if !next.is_finite() {
                return Err(Error::NonFinite { iteration: iterations });
            }
            max_step = max_step.max((next - *p).norm());
            *p = next;
        }
        trace.push(energy_at(system, &positions));
        if max_step < options.tol {
            converged = true;
            break;
        }
    }

    Ok(SolveReport {
        final_energy: *trace.last().unwrap_or(&initial_energy),
        final_positions: positions,
        iterations,
        initial_energy,
        converged,
        wall_time: clock.seconds(),
        energy_trace: trace,
    })
}
