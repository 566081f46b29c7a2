//! Causal/bicausal/multicausal transport as one LP on leaf-tuple
//! variables, with dual extraction into the structured potential
//! classes.
//!
//! Causality enters as linear product identities: for a constrained
//! marginal `i` and `t < T`,
//! `μ^i(ω_{1:t}) · π(ω, u) = μ^i(ω) · π(ω_{1:t}, u)` for every own leaf
//! `ω` and tuple `u` of the other marginals' depth-`t` nodes. Each
//! identity is divided by `μ^i(ω_{1:t})` before entering the matrix, and
//! one row per (own prefix, `u`) group is dropped — the group sums to
//! zero with weights `μ^i(ω)`, so it is implied by the rest.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec::Vec;

use crate::cost::CostFunction;
use crate::coupling::{Coupling, Mode};
use crate::dual::{CompensatorKey, DualPotential};
use crate::error::SolveError;
use crate::lp::{solve_lp, LinearProgram, LpSolution, LpStatus};
use crate::process::FilteredProcess;

/// What an LP row represents; consumed by the dual extraction.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum RowKind {
    Marginal { marginal: usize, leaf: usize },
    /// Identity for `(marginal, t)` at own leaf `own_leaf` against the
    /// other marginals' depth-`t` nodes `others` (marginal order, owner
    /// omitted).
    Causality { marginal: usize, t: usize, own_leaf: usize, others: Vec<usize> },
}

#[derive(Debug, Clone)]
pub struct AdaptedSolution {
    pub mode: Mode,
    pub value: f64,
    pub coupling: Coupling,
    pub lp: LpSolution,
    pub rows: Vec<RowKind>,
    /// Variable order used by the LP: all leaf tuples, odometer order.
    pub tuples: Vec<Vec<usize>>,
}

/// Which marginals carry causality constraints in a given mode.
pub fn constrained_marginals(mode: Mode, n: usize) -> Vec<usize> {
    match mode {
        Mode::Plain => Vec::new(),
        Mode::Causal => alloc::vec![0],
        Mode::Anticausal => alloc::vec![1],
        Mode::Bicausal => alloc::vec![0, 1],
        Mode::Multicausal => (0..n).collect(),
    }
}

fn all_tuples(marginals: &[&FilteredProcess]) -> Vec<Vec<usize>> {
    let mut tuples = Vec::new();
    let mut tuple = alloc::vec![0usize; marginals.len()];
    loop {
        tuples.push(tuple.clone());
        let mut k = marginals.len();
        loop {
            if k == 0 {
                return tuples;
            }
            k -= 1;
            tuple[k] += 1;
            if tuple[k] < marginals[k].leaf_count() {
                break;
            }
            tuple[k] = 0;
        }
    }
}

/// Tuples of one depth-`t` node per marginal in `others` (odometer order).
pub(crate) fn node_tuples(marginals: &[&FilteredProcess], others: &[usize], t: usize) -> Vec<Vec<usize>> {
    let mut out = alloc::vec![Vec::new()];
    for &j in others {
        let mut next = Vec::new();
        for prefix in &out {
            for &n in marginals[j].level(t) {
                let mut p = prefix.clone();
                p.push(n);
                next.push(p);
            }
        }
        out = next;
    }
    out
}

/// Build the constraint system for the given mode; `objective` is the
/// per-tuple cost in the order of the returned tuple list.
fn build_lp(
    marginals: &[&FilteredProcess],
    mode: Mode,
    objective: Vec<f64>,
    tuples: &[Vec<usize>],
) -> (LinearProgram, Vec<RowKind>) {
    let nvars = tuples.len();
    let n = marginals.len();
    let horizon = marginals[0].horizon();
    let mut rows = Vec::new();
    let mut rhs = Vec::new();
    let mut kinds = Vec::new();

    for (i, m) in marginals.iter().enumerate() {
        for l in 0..m.leaf_count() {
            let mut row = alloc::vec![0.0; nvars];
            for (v, tuple) in tuples.iter().enumerate() {
                if tuple[i] == l {
                    row[v] = 1.0;
                }
            }
            rows.push(row);
            rhs.push(m.path_prob(l));
            kinds.push(RowKind::Marginal { marginal: i, leaf: l });
        }
    }

    for &i in &constrained_marginals(mode, n) {
        let own = marginals[i];
        let other_idx: Vec<usize> = (0..n).filter(|&j| j != i).collect();
        for t in 1..horizon {
            for &p in own.level(t) {
                let leaves = own.leaves_under(p);
                for u in node_tuples(marginals, &other_idx, t) {
                    // Drop the last leaf of each group (implied row).
                    for &x in &leaves[..leaves.len() - 1] {
                        let ratio = own.path_prob(x) / own.node_prob(p);
                        let mut row = alloc::vec![0.0; nvars];
                        for (v, tuple) in tuples.iter().enumerate() {
                            let matches_u = other_idx
                                .iter()
                                .zip(u.iter())
                                .all(|(&j, &uj)| {
                                    marginals[j].prefix_node(tuple[j], t) == uj
                                });
                            if !matches_u {
                                continue;
                            }
                            if tuple[i] == x {
                                row[v] += 1.0;
                            }
                            if own.prefix_node(tuple[i], t) == p {
                                row[v] -= ratio;
                            }
                        }
                        rows.push(row);
                        rhs.push(0.0);
                        kinds.push(RowKind::Causality {
                            marginal: i,
                            t,
                            own_leaf: x,
                            others: u.clone(),
                        });
                    }
                }
            }
        }
    }

    (LinearProgram { objective, rows, rhs }, kinds)
}

fn check_inputs(marginals: &[&FilteredProcess], mode: Mode) -> Result<(), SolveError> {
    if marginals.len() < 2 {
        return Err(SolveError::BadInput("need at least two marginals".into()));
    }
    if matches!(mode, Mode::Causal | Mode::Anticausal | Mode::Bicausal)
        && marginals.len() != 2
    {
        return Err(SolveError::BadInput(format!(
            "{mode:?} mode requires exactly two marginals"
        )));
    }
    let horizon = marginals[0].horizon();
    if marginals.iter().any(|m| m.horizon() != horizon) {
        return Err(SolveError::HorizonMismatch(format!(
            "horizons {:?}",
            marginals.iter().map(|m| m.horizon()).collect::<Vec<_>>()
        )));
    }
    Ok(())
}

pub fn solve_adapted_lp(
    marginals: &[&FilteredProcess],
    c: &CostFunction,
    mode: Mode,
) -> Result<AdaptedSolution, SolveError> {
    check_inputs(marginals, mode)?;
    let tuples = all_tuples(marginals);
    let mut objective = Vec::with_capacity(tuples.len());
    for tuple in &tuples {
        objective.push(c.eval(marginals, tuple)?);
    }
    let (lp, kinds) = build_lp(marginals, mode, objective, &tuples);
    let sol = solve_lp(&lp)?;
    match sol.status {
        LpStatus::Optimal => {}
        LpStatus::Infeasible => {
            // The product coupling is always feasible, so this signals
            // an accuracy problem rather than a genuinely empty set.
            return Err(SolveError::Infeasible(
                "constraint system reported infeasible".into(),
            ));
        }
        LpStatus::Unbounded => {
            return Err(SolveError::NumericalFailure(
                "transport LP reported unbounded".into(),
            ))
        }
    }
    let mut mass = BTreeMap::new();
    for (v, tuple) in tuples.iter().enumerate() {
        if sol.primal[v] > 0.0 {
            mass.insert(tuple.clone(), sol.primal[v]);
        }
    }
    let coupling = Coupling::new(
        marginals.iter().map(|m| (*m).clone()).collect(),
        mass,
    )
    .map_err(|e| SolveError::NumericalFailure(format!("optimal coupling: {e}")))?;
    Ok(AdaptedSolution {
        mode,
        value: sol.value,
        coupling,
        lp: sol,
        rows: kinds,
        tuples,
    })
}

/// Map the LP multipliers into the structured dual class of the mode,
/// re-center the compensators, fix the additive gauge, and verify the
/// result against the primal value before returning it.
pub fn extract_dual(
    marginals: &[&FilteredProcess],
    c: &CostFunction,
    sol: &AdaptedSolution,
) -> Result<DualPotential, SolveError> {
    let n = marginals.len();
    let horizon = marginals[0].horizon();
    let constrained = constrained_marginals(sol.mode, n);

    // Sort multipliers by row meaning.
    let mut alpha: Vec<Vec<f64>> =
        marginals.iter().map(|m| alloc::vec![0.0; m.leaf_count()]).collect();
    let mut lambda: BTreeMap<(usize, usize, usize, Vec<usize>), f64> = BTreeMap::new();
    for (kind, &y) in sol.rows.iter().zip(sol.lp.duals.iter()) {
        match kind {
            RowKind::Marginal { marginal, leaf } => alpha[*marginal][*leaf] = y,
            RowKind::Causality { marginal, t, own_leaf, others } => {
                lambda.insert((*marginal, *t, *own_leaf, others.clone()), y);
            }
        }
    }

    // h_{i,t}(own leaf, u) = λ − kernel-weighted λ-mean over the leaf's
    // depth-t siblings: zero conditional mean given the depth-t prefix.
    let h = |i: usize, t: usize, leaf: usize, u: &[usize]| -> f64 {
        let m = marginals[i];
        let p = m.prefix_node(leaf, t);
        let own = lambda.get(&(i, t, leaf, u.to_vec())).copied().unwrap_or(0.0);
        let mut mean = 0.0;
        for &l in m.leaves_under(p) {
            let lv = lambda.get(&(i, t, l, u.to_vec())).copied().unwrap_or(0.0);
            mean += m.path_prob(l) / m.node_prob(p) * lv;
        }
        own - mean
    };

    let mut initial: Vec<BTreeMap<usize, f64>> = alloc::vec![BTreeMap::new(); n];
    let mut compensators = BTreeMap::new();
    let mut path_potential = None;

    for i in 0..n {
        if !constrained.contains(&i) {
            // Unconstrained side of the causal/anticausal classes: the
            // marginal multipliers live on whole leaf paths.
            path_potential = Some((i, alpha[i].clone()));
            continue;
        }
        let m = marginals[i];
        let other_idx: Vec<usize> = (0..n).filter(|&j| j != i).collect();
        // f^i_1 = E[α^i | first node].
        for &r in m.level(1) {
            initial[i].insert(r, m.cond_exp(r, |l| alpha[i][l]));
        }
        // Telescoping: the compensator at (own node at s, others at
        // s−1) collects the conditional-expectation increments of α^i
        // and of every h_{i,t}, t ≤ s−1 (increments of deeper h vanish
        // because their conditional means are zero above depth t).
        for s in 2..=horizon {
            for &node in m.level(s) {
                let parent = m.node(node).parent.expect("depth ≥ 2");
                for u_full in node_tuples(marginals, &other_idx, s - 1) {
                    let mut val = m.cond_exp(node, |l| alpha[i][l])
                        - m.cond_exp(parent, |l| alpha[i][l]);
                    for t in 1..s {
                        let u_t: Vec<usize> = other_idx
                            .iter()
                            .zip(u_full.iter())
                            .map(|(&j, &uj)| marginals[j].ancestor(uj, t))
                            .collect();
                        val += m.cond_exp(node, |l| h(i, t, l, &u_t))
                            - m.cond_exp(parent, |l| h(i, t, l, &u_t));
                    }
                    compensators.insert(
                        CompensatorKey {
                            marginal: i,
                            t: s,
                            own_node: node,
                            others: u_full,
                        },
                        val,
                    );
                }
            }
        }
    }

    // Additive gauge. Causal/anticausal: equal halves between the
    // initial table and the path potential. Bicausal/multicausal: equal
    // integrals across the marginals' initial tables.
    match &mut path_potential {
        Some((i, g)) => {
            let gi: f64 = g
                .iter()
                .enumerate()
                .map(|(l, v)| marginals[*i].path_prob(l) * v)
                .sum();
            let j = 1 - *i;
            let fj: f64 = initial[j]
                .iter()
                .map(|(&node, v)| marginals[j].node_prob(node) * v)
                .sum();
            let kappa = (fj - gi) / 2.0;
            for v in initial[j].values_mut() {
                *v -= kappa;
            }
            for v in g.iter_mut() {
                *v += kappa;
            }
        }
        None => {
            let ints: Vec<f64> = (0..n)
                .map(|i| {
                    initial[i]
                        .iter()
                        .map(|(&node, v)| marginals[i].node_prob(node) * v)
                        .sum()
                })
                .collect();
            let target: f64 = ints.iter().sum::<f64>() / n as f64;
            for i in 0..n {
                let shift = target - ints[i];
                for v in initial[i].values_mut() {
                    *v += shift;
                }
            }
        }
    }

    let mut dual = DualPotential {
        mode: sol.mode,
        initial,
        path_potential,
        compensators,
    };
    dual.recenter(marginals);
    dual.verify(marginals, c, sol.value)?;
    Ok(dual)
}
