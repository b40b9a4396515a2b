//! Polak-Ribiere nonlinear conjugate gradient with a backtracking Armijo line
//! search, used as the reference minimizer.

use super::{energy_at, energy_gradient, SolveReport, SpringSystem};
use crate::clock::Stopwatch;
use crate::geometry::Vec2;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgdOptions {
    /// Stop once the gradient infinity-norm drops below this.
    pub tol: f64,
    pub max_iter: usize,
    /// Armijo sufficient-decrease constant.
    pub armijo: f64,
}

impl Default for CgdOptions {
    fn default() -> Self {
        CgdOptions {
            tol: 1e-3,
            max_iter: 5000,
            armijo: 1e-4,
        }
    }
}

const MIN_STEP: f64 = 1e-20;

fn inf_norm(v: &[Vec2]) -> f64 {
    v.iter().fold(0.0, |m, p| m.max(p.x.abs()).max(p.y.abs()))
}

fn dot(a: &[Vec2], b: &[Vec2]) -> f64 {
    a.iter().zip(b).map(|(p, q)| p.dot(*q)).sum()
}

pub fn solve_cgd(system: &SpringSystem, options: CgdOptions) -> Result<SolveReport> {
    if !(options.tol > 0.0) || options.max_iter == 0 {
        return Err(Error::InvalidArgument(format!(
            "tol must be positive and max_iter at least 1 (got {}, {})",
            options.tol, options.max_iter
        )));
    }
    let clock = Stopwatch::start();
    let mut x = system.nodes().to_vec();
    let mut energy = energy_at(system, &x);
    let initial_energy = energy;
    let mut trace = vec![energy];
    let mut grad = energy_gradient(system, &x);
    let mut direction: Vec<Vec2> = grad.iter().map(|&g| -g).collect();
    let mut step = 1.0 / inf_norm(&grad).max(1.0);
    let mut iterations = 0;
    let mut converged = false;
    let mut candidate = x.clone();

    loop {
        let gnorm = inf_norm(&grad);
        if !gnorm.is_finite() {
            return Err(Error::NonFinite { iteration: iterations });
        }
        if gnorm < options.tol {
            converged = true;
            break;
        }
        if iterations >= options.max_iter {
            break;
        }
        iterations += 1;

        let mut slope = dot(&grad, &direction);
        if slope >= 0.0 {
            direction = grad.iter().map(|&g| -g).collect();
            slope = dot(&grad, &direction);
        }

        // backtracking from twice the last accepted step
        let mut alpha = step * 2.0;
        let mut candidate_energy;
        loop {
            for ((c, &p), &d) in candidate.iter_mut().zip(&x).zip(&direction) {
                *c = p + d * alpha;
            }
            candidate_energy = energy_at(system, &candidate);
            if candidate_energy <= energy + options.armijo * alpha * slope {
                break;
            }
            alpha *= 0.5;
            if alpha < MIN_STEP {
                break;
            }
        }
        if alpha < MIN_STEP {
            // no further decrease along any usable direction
            break;
        }
        step = alpha;
        std::mem::swap(&mut x, &mut candidate);
        energy = candidate_energy;
        trace.push(energy);

        let next_grad = energy_gradient(system, &x);
        let prev_sq = dot(&grad, &grad);
        let beta = if prev_sq > 0.0 {
            let change: f64 = next_grad.iter().zip(&grad).map(|(&a, &b)| a.dot(a - b)).sum();
            (change / prev_sq).max(0.0)
        } else {
            0.0
        };
        for (d, &g) in direction.iter_mut().zip(&next_grad) {
            *d = -g + *d * beta;
        }
        grad = next_grad;
    }

    if x.iter().any(|p| !p.is_finite()) {
        return Err(Error::NonFinite { iteration: iterations });
    }
    Ok(SolveReport {
        final_positions: x,
        iterations,
        initial_energy,
        final_energy: energy,
        converged,
        wall_time: clock.seconds(),
        energy_trace: trace,
    })
}
