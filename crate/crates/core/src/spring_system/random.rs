//! Randomized spring systems for solver benchmarking.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{DynamicSpring, SpringSystem, StaticSpring};
use crate::geometry::Vec2;
use crate::{Error, Result};

/// Relative size change that sets dynamic stiffness `(SIZE_CHANGE * d)^-2`.
const SIZE_CHANGE: f64 = 0.1;

pub fn generate_random_system(n_dyn: usize, seed: u64) -> Result<SpringSystem> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    generate_random_system_with(n_dyn, &mut rng)
}

/// Nodes start uniform in the unit square and are then displaced by
/// `U([-0.5, 0.5]^2)`; each anchor sits at its displaced node plus
/// `U([-0.25, 0.25]^2)`. The complete graph of dynamic springs keeps the
/// pre-displacement distances as nominal lengths.
pub fn generate_random_system_with<R: Rng + ?Sized>(n_dyn: usize, rng: &mut R) -> Result<SpringSystem> {
    if n_dyn < 2 {
        return Err(Error::InvalidArgument(format!(
            "random spring systems need at least 2 dynamic nodes, got {n_dyn}"
        )));
    }
    let mut uniform = |lo: f64, hi: f64| rng.random_range(lo..hi);
    let rest: Vec<Vec2> = (0..n_dyn).map(|_| Vec2::new(uniform(0.0, 1.0), uniform(0.0, 1.0))).collect();
    let displaced: Vec<Vec2> = rest
        .iter()
        .map(|&p| p + Vec2::new(uniform(-0.5, 0.5), uniform(-0.5, 0.5)))
        .collect();
    let anchors: Vec<Vec2> = displaced
        .iter()
        .map(|&p| p + Vec2::new(uniform(-0.25, 0.25), uniform(-0.25, 0.25)))
        .collect();

    let mut dynamic = Vec::with_capacity(n_dyn * (n_dyn - 1) / 2);
    for a in 0..n_dyn {
        for b in a + 1..n_dyn {
            let length = rest[a].distance(rest[b]);
            dynamic.push(DynamicSpring {
                a,
                b,
                stiffness: (SIZE_CHANGE * length).powi(-2),
                rest_length: length,
            });
        }
    }
    let mean_dyn = dynamic.iter().map(|s| s.stiffness).sum::<f64>() / dynamic.len() as f64;
    let statics = (0..n_dyn)
        .map(|i| StaticSpring {
            node: i,
            anchor: i,
            stiffness: 0.5 + uniform(0.0, 1.0) * mean_dyn,
        })
        .collect();
    SpringSystem::new(rest, anchors, dynamic, statics)
}
