//! Structured dual potentials for causal, bicausal and multicausal
//! transport.
//!
//! A potential is a sum of initial parts (per-marginal tables on time-1
//! nodes, plus an optional whole-path table for the causal class) and
//! compensators: tables `f^i_t` keyed by the owning marginal's node at
//! depth `t` together with the other marginals' nodes at depth `t−1`,
//! each with zero conditional mean under the owner's one-step kernel.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec::Vec;

use crate::cost::CostFunction;
use crate::coupling::Mode;
use crate::error::SolveError;
use crate::math::{fabs, fmax};
use crate::process::FilteredProcess;
use crate::{DUAL_TOL, INPUT_TOL};

/// Index of one compensator entry: the owning marginal, the time
/// `t ≥ 2`, the owner's node at depth `t`, and the other marginals'
/// nodes at depth `t−1` (in marginal order, owner omitted).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct CompensatorKey {
    pub marginal: usize,
    pub t: usize,
    pub own_node: usize,
    pub others: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct DualPotential {
    pub mode: Mode,
    /// Per marginal: table on its time-1 nodes. For the causal class
    /// only marginal 0 carries an initial table.
    pub initial: Vec<BTreeMap<usize, f64>>,
    /// Causal class only: (marginal index, table on that marginal's
    /// leaf paths) — the `g` part living on whole paths.
    pub path_potential: Option<(usize, Vec<f64>)>,
    /// Missing keys are zero.
    pub compensators: BTreeMap<CompensatorKey, f64>,
}

impl DualPotential {
    fn comp(&self, key: &CompensatorKey) -> f64 {
        self.compensators.get(key).copied().unwrap_or(0.0)
    }

    /// The assembled potential `s` at a tuple of leaf indices.
    pub fn evaluate(&self, marginals: &[&FilteredProcess], tuple: &[usize]) -> f64 {
        let horizon = marginals[0].horizon();
        let mut s = 0.0;
        for (i, table) in self.initial.iter().enumerate() {
            let root = marginals[i].prefix_node(tuple[i], 1);
            s += table.get(&root).copied().unwrap_or(0.0);
        }
        if let Some((i, g)) = &self.path_potential {
            s += g[tuple[*i]];
        }
        for i in 0..marginals.len() {
            for t in 2..=horizon {
                let own = marginals[i].prefix_node(tuple[i], t);
                let others: Vec<usize> = (0..marginals.len())
                    .filter(|&j| j != i)
                    .map(|j| marginals[j].prefix_node(tuple[j], t - 1))
                    .collect();
                s += self.comp(&CompensatorKey { marginal: i, t, own_node: own, others });
            }
        }
        s
    }

    /// Dual objective: `Σ_i ∫ f^i_1 dμ^i_1` plus, for the causal class,
    /// `∫ g dν` over the whole path law.
    pub fn value(&self, marginals: &[&FilteredProcess]) -> f64 {
        let mut v = 0.0;
        for (i, table) in self.initial.iter().enumerate() {
            for (node, p) in marginals[i].initial_law() {
                v += p * table.get(&node).copied().unwrap_or(0.0);
            }
        }
        if let Some((i, g)) = &self.path_potential {
            for (l, gv) in g.iter().enumerate() {
                v += marginals[*i].path_prob(l) * gv;
            }
        }
        v
    }

    /// Worst absolute conditional mean of any compensator slice: for
    /// each (marginal, t, own parent, others), `Σ_c K(c) f^i_t(c, ...)`.
    pub fn worst_compensator_mean(&self, marginals: &[&FilteredProcess]) -> f64 {
        // Group entries by (marginal, t, parent of own node, others) and
        // sum with kernel weights; nodes absent from the table count as
        // zero, so summing over present entries is exact.
        let mut sums: BTreeMap<(usize, usize, usize, Vec<usize>), f64> = BTreeMap::new();
        for (key, val) in &self.compensators {
            let m = marginals[key.marginal];
            let parent = m.node(key.own_node).parent.expect("compensators start at t=2");
            let w = m.node(key.own_node).cond_prob;
            *sums
                .entry((key.marginal, key.t, parent, key.others.clone()))
                .or_insert(0.0) += w * val;
        }
        let mut worst = 0.0;
        for (_, s) in sums {
            worst = fmax(worst, fabs(s));
        }
        worst
    }

    /// Re-center every compensator slice so its conditional mean is
    /// exactly zero (subtracting the current mean from each entry; the
    /// assembled `s` changes by at most the prior mean magnitudes).
    pub fn recenter(&mut self, marginals: &[&FilteredProcess]) {
        let mut sums: BTreeMap<(usize, usize, usize, Vec<usize>), f64> = BTreeMap::new();
        for (key, val) in &self.compensators {
            let m = marginals[key.marginal];
            let parent = m.node(key.own_node).parent.expect("compensators start at t=2");
            let w = m.node(key.own_node).cond_prob;
            *sums
                .entry((key.marginal, key.t, parent, key.others.clone()))
                .or_insert(0.0) += w * val;
        }
        // A slice's table may omit some siblings (implicit zeros); the
        // subtraction must then materialize them so the new mean is zero.
        let mut patched = self.compensators.clone();
        for ((mi, t, parent, others), mean) in sums {
            if mean == 0.0 {
                continue;
            }
            for &c in marginals[mi].children(parent) {
                let key = CompensatorKey { marginal: mi, t, own_node: c, others: others.clone() };
                *patched.entry(key).or_insert(0.0) -= mean;
            }
        }
        self.compensators = patched;
    }

    /// Worst violation of `s ≤ c` over all leaf tuples, as `max (s − c)`.
    pub fn worst_feasibility(
        &self,
        marginals: &[&FilteredProcess],
        c: &CostFunction,
    ) -> Result<f64, SolveError> {
        let mut worst = f64::NEG_INFINITY;
        let mut tuple = alloc::vec![0usize; marginals.len()];
        loop {
            let s = self.evaluate(marginals, &tuple);
            let cv = c.eval(marginals, &tuple)?;
            worst = fmax(worst, s - cv);
            let mut k = marginals.len();
            loop {
                if k == 0 {
                    return Ok(worst);
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

    /// Full verification against a primal value: compensator means
    /// within the input tolerance, pointwise feasibility `s ≤ c`, and
    /// dual value equal to the primal, both within the dual tolerance.
    pub fn verify(
        &self,
        marginals: &[&FilteredProcess],
        c: &CostFunction,
        primal_value: f64,
    ) -> Result<(), SolveError> {
        let mean = self.worst_compensator_mean(marginals);
        if mean > INPUT_TOL {
            return Err(SolveError::DualVerificationFailed(format!(
                "compensator conditional mean {mean}"
            )));
        }
        let feas = self.worst_feasibility(marginals, c)?;
        if feas > DUAL_TOL {
            return Err(SolveError::DualVerificationFailed(format!(
                "s exceeds c by {feas}"
            )));
        }
        let gap = fabs(self.value(marginals) - primal_value);
        if gap > DUAL_TOL {
            return Err(SolveError::DualVerificationFailed(format!(
                "duality gap {gap}"
            )));
        }
        Ok(())
    }
}
