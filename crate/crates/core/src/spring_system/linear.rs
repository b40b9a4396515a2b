//! Closed-form equilibrium of a 1D spring system.
//!
//! With node forces `F = -B^T K (B x - L)`, equilibrium is `K^ x = C L` where
//! `K^ = B^T K B` and `C = B^T K`. Splitting the columns into dynamic and
//! anchor blocks gives `x_dyn = K^_dyn^-1 (C_dyn L - K^_stat x_stat)`.
//!
//! The dynamic term of the energy carries no 1/2 factor, so a dynamic spring
//! enters `K` with twice its stiffness. The fixed point of the per-axis
//! iteration is then a stationary point of the energy as written.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use super::SpringSystem;
use crate::{Error, Result};

/// Factored `K^_dyn` together with the anchor coupling `K^_stat`.
///
/// Factor once per system; both axes and every iteration reuse it.
#[derive(Debug, Clone)]
pub struct AxisSolver {
    factor: Cholesky<f64, Dyn>,
    stat_coupling: DMatrix<f64>,
    /// (first node, second node, linear stiffness) per dynamic spring.
    dyn_terms: Vec<(usize, usize, f64)>,
    n_static: usize,
}

impl AxisSolver {
    pub fn new(system: &SpringSystem) -> Result<Self> {
        let n = system.num_nodes();
        let n_anchor = system.anchors().len();
        check_anchored(system)?;

        let mut k_dyn = DMatrix::<f64>::zeros(n, n);
        let mut k_stat = DMatrix::<f64>::zeros(n, n_anchor);
        let mut dyn_terms = Vec::with_capacity(system.dynamic_springs().len());
        for s in system.dynamic_springs() {
            let k = 2.0 * s.stiffness;
            k_dyn[(s.a, s.a)] += k;
            k_dyn[(s.b, s.b)] += k;
            k_dyn[(s.a, s.b)] -= k;
            k_dyn[(s.b, s.a)] -= k;
            dyn_terms.push((s.a, s.b, k));
        }
        for s in system.static_springs() {
            k_dyn[(s.node, s.node)] += s.stiffness;
            k_stat[(s.node, s.anchor)] -= s.stiffness;
        }
        let factor = Cholesky::new(k_dyn).ok_or_else(|| Error::Singular {
            nodes: (0..n).collect(),
        })?;
        Ok(AxisSolver {
            factor,
            stat_coupling: k_stat,
            dyn_terms,
            n_static: system.static_springs().len(),
        })
    }

    /// `K^_stat x_stat` for one axis of anchor coordinates.
    pub fn anchor_term(&self, anchors_1d: &[f64]) -> DVector<f64> {
        &self.stat_coupling * DVector::from_column_slice(anchors_1d)
    }

    /// Solves for the dynamic coordinates given a precomputed anchor term.
    ///
    /// `lengths` holds one signed nominal length per spring, dynamic springs
    /// first; static entries are ignored since their rest length is zero.
    pub fn solve_with_anchor_term(&self, anchor_term: &DVector<f64>, lengths: &[f64]) -> Vec<f64> {
        let mut rhs = -anchor_term.clone();
        for (&(a, b, k), &l) in self.dyn_terms.iter().zip(lengths) {
            rhs[a] += k * l;
            rhs[b] -= k * l;
        }
        self.factor.solve(&rhs).iter().copied().collect()
    }

    pub fn num_springs(&self) -> usize {
        self.dyn_terms.len() + self.n_static
    }
}

/// Equilibrium positions of the dynamic nodes of a 1D system.
///
/// `anchors_1d` gives one coordinate per anchor and `signed_lengths` one
/// signed nominal length per spring (dynamic springs, then static springs).
pub fn solve_1d(system: &SpringSystem, anchors_1d: &[f64], signed_lengths: &[f64]) -> Result<Vec<f64>> {
    if anchors_1d.len() != system.anchors().len() {
        return Err(Error::InvalidArgument(format!(
            "expected {} anchor coordinates, got {}",
            system.anchors().len(),
            anchors_1d.len()
        )));
    }
    if signed_lengths.len() != system.num_springs() {
        return Err(Error::InvalidArgument(format!(
            "expected {} spring lengths, got {}",
            system.num_springs(),
            signed_lengths.len()
        )));
    }
    let solver = AxisSolver::new(system)?;
    let term = solver.anchor_term(anchors_1d);
    Ok(solver.solve_with_anchor_term(&term, signed_lengths))
}

/// Every group of dynamic nodes joined by stiff springs must reach at least
/// one anchor through a stiff static spring, otherwise `K^_dyn` is singular.
fn check_anchored(system: &SpringSystem) -> Result<()> {
    let n = system.num_nodes();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    for s in system.dynamic_springs().iter().filter(|s| s.stiffness > 0.0) {
        let (ra, rb) = (find(&mut parent, s.a), find(&mut parent, s.b));
        if ra != rb {
            parent[ra] = rb;
        }
    }
    let mut anchored = vec![false; n];
    for s in system.static_springs().iter().filter(|s| s.stiffness > 0.0) {
        let r = find(&mut parent, s.node);
        anchored[r] = true;
    }
    let loose: Vec<usize> = (0..n).filter(|&i| !anchored[find(&mut parent, i)]).collect();
    if loose.is_empty() {
        Ok(())
    } else {
        Err(Error::Singular { nodes: loose })
    }
}
