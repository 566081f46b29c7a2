//! One-step discrete optimal transport on top of the simplex engine.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::LpError;
use crate::lp::{solve_lp, LinearProgram, LpStatus};
use crate::math::fabs;
use crate::INPUT_TOL;

/// Optimal plan with its dual potentials, `φ_a + ψ_b ≤ C_ab` and
/// `Σ p φ + Σ q ψ = value`. Gauge: `ψ` of the last atom is 0.
#[derive(Debug, Clone)]
pub struct TransportSolution {
    pub plan: Vec<Vec<f64>>,
    pub phi: Vec<f64>,
    pub psi: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
}

pub fn solve_transport(
    p: &[f64],
    q: &[f64],
    cost: &[Vec<f64>],
) -> Result<TransportSolution, LpError> {
    let na = p.len();
    let nb = q.len();
    if na == 0 || nb == 0 {
        return Err(LpError::BadProblem("empty distribution".into()));
    }
    if cost.len() != na || cost.iter().any(|r| r.len() != nb) {
        return Err(LpError::BadProblem("cost matrix shape mismatch".into()));
    }
    let sp: f64 = p.iter().sum();
    let sq: f64 = q.iter().sum();
    if fabs(sp - 1.0) > INPUT_TOL || fabs(sq - 1.0) > INPUT_TOL {
        return Err(LpError::BadProblem(format!(
            "distributions sum to {sp} and {sq}"
        )));
    }

    // Variables x_{ab} in row-major order; row-sum and column-sum
    // constraints (one of which is redundant — the simplex tolerates it).
    let n = na * nb;
    let m = na + nb;
    let mut rows = vec![vec![0.0; n]; m];
    let mut rhs = vec![0.0; m];
    let mut objective = vec![0.0; n];
    for a in 0..na {
        rhs[a] = p[a];
        for b in 0..nb {
            rows[a][a * nb + b] = 1.0;
            rows[na + b][a * nb + b] = 1.0;
            objective[a * nb + b] = cost[a][b];
        }
    }
    for b in 0..nb {
        rhs[na + b] = q[b];
    }

    let sol = solve_lp(&LinearProgram { objective, rows, rhs })?;
    match sol.status {
        LpStatus::Optimal => {}
        s => {
            return Err(LpError::NumericalFailure(format!(
                "transport LP reported {s:?}"
            )))
        }
    }

    let mut plan = vec![vec![0.0; nb]; na];
    for a in 0..na {
        for b in 0..nb {
            plan[a][b] = sol.primal[a * nb + b];
        }
    }
    let mut phi: Vec<f64> = sol.duals[..na].to_vec();
    let mut psi: Vec<f64> = sol.duals[na..].to_vec();
    // Fix the additive gauge: ψ at the last atom of q is zero.
    let shift = psi[nb - 1];
    for v in phi.iter_mut() {
        *v += shift;
    }
    for v in psi.iter_mut() {
        *v -= shift;
    }
    Ok(TransportSolution { plan, phi, psi, value: sol.value, iterations: sol.iterations })
}
