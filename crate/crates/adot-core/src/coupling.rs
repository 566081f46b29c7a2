//! Joint laws over tuples of processes and their (multi)causality checks.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::cost::CostFunction;
use crate::error::{CostError, CouplingError};
use crate::math::fabs;
use crate::process::FilteredProcess;
use crate::DERIVED_TOL;

/// Constraint class against which a coupling is checked or a transport
/// problem solved.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Plain,
    Causal,
    Anticausal,
    Bicausal,
    Multicausal,
}

/// Result of a coupling check.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingReport {
    pub ok: bool,
    pub mode: Mode,
    pub worst_violation: f64,
    pub witness: Option<String>,
}

/// A joint law on tuples of leaf paths, one leaf index per marginal.
#[derive(Debug, Clone)]
pub struct Coupling {
    pub marginals: Vec<FilteredProcess>,
    pub mass: BTreeMap<Vec<usize>, f64>,
}

impl Coupling {
    /// Build a coupling, clipping tiny negative masses to zero.
    ///
    /// Marginal agreement with the processes' path laws is deliberately
    /// not enforced here; it is reported by [`Coupling::check`] in
    /// `Plain` mode so that near-misses carry a quantitative witness.
    pub fn new(
        marginals: Vec<FilteredProcess>,
        mass: BTreeMap<Vec<usize>, f64>,
    ) -> Result<Self, CouplingError> {
        if marginals.is_empty() {
            return Err(CouplingError::ArityMismatch("no marginals".into()));
        }
        let n = marginals.len();
        let mut clipped = BTreeMap::new();
        let mut total = 0.0;
        for (tuple, p) in mass {
            if tuple.len() != n {
                return Err(CouplingError::ArityMismatch(format!(
                    "tuple of length {} for {} marginals",
                    tuple.len(),
                    n
                )));
            }
            for (i, &l) in tuple.iter().enumerate() {
                if l >= marginals[i].leaf_count() {
                    return Err(CouplingError::ArityMismatch(format!(
                        "leaf index {l} out of range for marginal {i}"
                    )));
                }
            }
            if p < -1e-12 {
                return Err(CouplingError::NegativeMass(format!("tuple {tuple:?} has mass {p}")));
            }
            let p = if p < 0.0 { 0.0 } else { p };
            if p > 0.0 {
                total += p;
                *clipped.entry(tuple).or_insert(0.0) += p;
            }
        }
        if fabs(total - 1.0) > crate::INPUT_TOL {
            return Err(CouplingError::BadTotalMass(format!("total mass {total}")));
        }
        Ok(Coupling { marginals, mass: clipped })
    }

    /// Independent coupling of the given processes.
    pub fn product(marginals: &[&FilteredProcess]) -> Coupling {
        let mut mass = BTreeMap::new();
        let mut tuple = alloc::vec![0usize; marginals.len()];
        loop {
            let p: f64 = marginals
                .iter()
                .zip(tuple.iter())
                .map(|(m, &l)| m.path_prob(l))
                .product();
            mass.insert(tuple.clone(), p);
            let mut k = marginals.len();
            loop {
                if k == 0 {
                    return Coupling {
                        marginals: marginals.iter().map(|m| (*m).clone()).collect(),
                        mass,
                    };
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

    fn horizon(&self) -> usize {
        self.marginals[0].horizon()
    }

    /// Worst deviation of the i-th marginal from its path law.
    fn marginal_violation(&self, i: usize) -> (f64, Option<String>) {
        let m = &self.marginals[i];
        let mut leaf_mass = alloc::vec![0.0; m.leaf_count()];
        for (tuple, p) in &self.mass {
            leaf_mass[tuple[i]] += p;
        }
        let mut worst = 0.0;
        let mut witness = None;
        for l in 0..m.leaf_count() {
            let dev = fabs(leaf_mass[l] - m.path_prob(l));
            if dev > worst {
                worst = dev;
                witness = Some(format!(
                    "marginal {i} leaf '{}': coupling mass {} vs path prob {}",
                    m.node(m.path(l)[m.horizon() - 1]).id,
                    leaf_mass[l],
                    m.path_prob(l)
                ));
            }
        }
        (worst, witness)
    }

    /// Worst violation of the causality product identities for marginal
    /// `i`: for t = 1..T−1, own leaf ω, others' prefix tuple u at depth t,
    /// μ^i(ω_{1:t})·π(ω, u) = μ^i(ω)·π(ω_{1:t}, u).
    fn causality_violation(&self, i: usize) -> (f64, Option<String>) {
        let own = &self.marginals[i];
        let mut worst = 0.0;
        let mut witness = None;
        for t in 1..self.horizon() {
            // π(own leaf, u) and π(own prefix node, u) over the support.
            let mut leaf_u: BTreeMap<(usize, Vec<usize>), f64> = BTreeMap::new();
            let mut prefix_u: BTreeMap<(usize, Vec<usize>), f64> = BTreeMap::new();
            for (tuple, p) in &self.mass {
                let u: Vec<usize> = tuple
                    .iter()
                    .enumerate()
                    .filter(|&(j, _)| j != i)
                    .map(|(j, &l)| self.marginals[j].prefix_node(l, t))
                    .collect();
                let pfx = own.prefix_node(tuple[i], t);
                *leaf_u.entry((tuple[i], u.clone())).or_insert(0.0) += p;
                *prefix_u.entry((pfx, u)).or_insert(0.0) += p;
            }
            for ((pfx, u), pi_pu) in &prefix_u {
                for &l in own.leaves_under(*pfx) {
                    let pi_lu = leaf_u.get(&(l, u.clone())).copied().unwrap_or(0.0);
                    let lhs = own.node_prob(*pfx) * pi_lu;
                    let rhs = own.path_prob(l) * pi_pu;
                    let dev = fabs(lhs - rhs);
                    if dev > worst {
                        worst = dev;
                        witness = Some(format!(
                            "marginal {i}, t={t}, own prefix '{}', leaf path {l}: \
                             {lhs} vs {rhs}",
                            own.node(*pfx).id
                        ));
                    }
                }
            }
        }
        (worst, witness)
    }

    /// Check the coupling against the requested constraint class. Every
    /// mode includes the marginal consistency check.
    pub fn check(&self, mode: Mode) -> CouplingReport {
        let n = self.marginals.len();
        let mut worst = 0.0;
        let mut witness = None;
        let mut absorb = |(v, w): (f64, Option<String>)| {
            if v > worst {
                worst = v;
                witness = w;
            }
        };
        for i in 0..n {
            absorb(self.marginal_violation(i));
        }
        match mode {
            Mode::Plain => {}
            Mode::Causal => absorb(self.causality_violation(0)),
            Mode::Anticausal => absorb(self.causality_violation(1)),
            Mode::Bicausal => {
                absorb(self.causality_violation(0));
                absorb(self.causality_violation(1));
            }
            Mode::Multicausal => {
                for i in 0..n {
                    absorb(self.causality_violation(i));
                }
            }
        }
        CouplingReport { ok: worst <= DERIVED_TOL, mode, worst_violation: worst, witness }
    }

    /// `Σ mass · c` over the support.
    pub fn expected_cost(&self, c: &CostFunction) -> Result<f64, CostError> {
        let refs: Vec<&FilteredProcess> = self.marginals.iter().collect();
        let mut acc = 0.0;
        for (tuple, p) in &self.mass {
            acc += p * c.eval(&refs, tuple)?;
        }
        Ok(acc)
    }

    /// Conditional one-step joint laws at time `t` in `1..=T`: for each
    /// support prefix tuple at depth t−1 (the empty tuple for t=1), the
    /// conditional distribution over depth-t node tuples.
    pub fn disintegrate(
        &self,
        t: usize,
    ) -> BTreeMap<Vec<usize>, Vec<(Vec<usize>, f64)>> {
        let mut joint: BTreeMap<(Vec<usize>, Vec<usize>), f64> = BTreeMap::new();
        let mut prefix_mass: BTreeMap<Vec<usize>, f64> = BTreeMap::new();
        for (tuple, p) in &self.mass {
            let prev: Vec<usize> = if t == 1 {
                Vec::new()
            } else {
                tuple
                    .iter()
                    .enumerate()
                    .map(|(j, &l)| self.marginals[j].prefix_node(l, t - 1))
                    .collect()
            };
            let cur: Vec<usize> = tuple
                .iter()
                .enumerate()
                .map(|(j, &l)| self.marginals[j].prefix_node(l, t))
                .collect();
            *joint.entry((prev.clone(), cur)).or_insert(0.0) += p;
            *prefix_mass.entry(prev).or_insert(0.0) += p;
        }
        let mut out: BTreeMap<Vec<usize>, Vec<(Vec<usize>, f64)>> = BTreeMap::new();
        for ((prev, cur), p) in joint {
            let total = prefix_mass[&prev];
            out.entry(prev).or_default().push((cur, p / total));
        }
        out
    }

    /// Mass of a prefix-tuple event at depth `t`.
    pub fn prefix_mass(&self, nodes: &[usize], t: usize) -> f64 {
        self.mass
            .iter()
            .filter(|(tuple, _)| {
                tuple
                    .iter()
                    .enumerate()
                    .all(|(j, &l)| self.marginals[j].prefix_node(l, t) == nodes[j])
            })
            .map(|(_, p)| p)
            .sum()
    }
}
