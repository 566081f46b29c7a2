//! Polar-set analysis: maximal event mass over a constraint class, and
//! structural certificates for polar events.
//!
//! An event `E` (a set of leaf tuples) is polar when every coupling in
//! the class gives it zero mass. The certificate mirrors the dual proof:
//! solve the transport problem with cost `−1_E`, normalize the dual so
//! every initial integral vanishes, and read off the zero-level sets of
//! the potentials as kernel-full slices whose gluing avoids `E`.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec::Vec;

use crate::cost::CostFunction;
use crate::coupling::Mode;
use crate::dual::CompensatorKey;
use crate::error::{PolarError, SolveError};
use crate::math::{fabs, fmax};
use crate::process::FilteredProcess;
use crate::solver::{constrained_marginals, extract_dual, solve_adapted_lp};
use crate::INPUT_TOL;

/// Conditioning index of one slice: time `t`, the owning marginal's
/// node at depth `t−1` (none for `t = 1`), and the other marginals'
/// nodes at depth `t−1` (empty when the slice may not depend on them).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct SliceKey {
    pub marginal: usize,
    pub t: usize,
    pub own_parent: Option<usize>,
    pub others: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct PolarCertificate {
    pub mode: Mode,
    /// Admitted depth-`t` nodes per slice.
    pub slices: BTreeMap<SliceKey, Vec<usize>>,
    /// Whether each Y-side slice was built independently of the X-prefix
    /// (causal mode structure).
    pub prefix_free_marginals: Vec<usize>,
}

impl PolarCertificate {
    fn slice(&self, key: &SliceKey) -> Option<&Vec<usize>> {
        self.slices.get(key)
    }

    /// Whether a leaf tuple lies in the gluing (every coordinate passes
    /// every slice along its path).
    pub fn contains(&self, marginals: &[&FilteredProcess], tuple: &[usize]) -> bool {
        let horizon = marginals[0].horizon();
        for t in 1..=horizon {
            for (i, m) in marginals.iter().enumerate() {
                let node = m.prefix_node(tuple[i], t);
                let own_parent = if t == 1 { None } else { Some(m.prefix_node(tuple[i], t - 1)) };
                let others = if self.prefix_free_marginals.contains(&i) || t == 1 {
                    Vec::new()
                } else {
                    (0..marginals.len())
                        .filter(|&j| j != i)
                        .map(|j| marginals[j].prefix_node(tuple[j], t - 1))
                        .collect()
                };
                let key = SliceKey { marginal: i, t, own_parent, others };
                match self.slice(&key) {
                    Some(admitted) if admitted.contains(&node) => {}
                    // missing slice counts as full
                    None => {}
                    Some(_) => return false,
                }
            }
        }
        true
    }
}

/// Maximal mass of `E` over the constraint class, by LP.
pub fn polar_max(
    event: &[Vec<usize>],
    marginals: &[&FilteredProcess],
    mode: Mode,
) -> Result<f64, SolveError> {
    let cost = indicator_cost(event, marginals)?;
    let sol = solve_adapted_lp(marginals, &cost, mode)?;
    Ok(-sol.value)
}

/// `−1_E` as a full table over all leaf tuples.
fn indicator_cost(
    event: &[Vec<usize>],
    marginals: &[&FilteredProcess],
) -> Result<CostFunction, SolveError> {
    let mut table = BTreeMap::new();
    let mut tuple = alloc::vec![0usize; marginals.len()];
    loop {
        table.insert(tuple.clone(), 0.0);
        let mut k = marginals.len();
        let mut done = false;
        loop {
            if k == 0 {
                done = true;
                break;
            }
            k -= 1;
            tuple[k] += 1;
            if tuple[k] < marginals[k].leaf_count() {
                break;
            }
            tuple[k] = 0;
        }
        if done {
            break;
        }
    }
    for e in event {
        if e.len() != marginals.len() {
            return Err(SolveError::BadInput(format!(
                "event tuple of length {}, expected {}",
                e.len(),
                marginals.len()
            )));
        }
        match table.get_mut(e) {
            Some(v) => *v = -1.0,
            None => {
                return Err(SolveError::BadInput(format!(
                    "event tuple {e:?} outside the product support"
                )))
            }
        }
    }
    Ok(CostFunction::Table(table))
}

pub fn polar_certificate(
    event: &[Vec<usize>],
    marginals: &[&FilteredProcess],
    mode: Mode,
) -> Result<PolarCertificate, PolarError> {
    let max_mass = polar_max(event, marginals, mode)?;
    if max_mass > INPUT_TOL {
        return Err(PolarError::NotPolar(format!("max event mass {max_mass}")));
    }
    let cost = indicator_cost(event, marginals)?;
    let sol = solve_adapted_lp(marginals, &cost, mode)?;
    let dual = extract_dual(marginals, &cost, &sol)?;

    let n = marginals.len();
    let horizon = marginals[0].horizon();
    let constrained = constrained_marginals(mode, n);
    let prefix_free: Vec<usize> = (0..n).filter(|i| !constrained.contains(i)).collect();

    // Decompose a whole-path potential into per-time martingale
    // increments, so the unconstrained side also yields per-time slices
    // that only depend on its own prefix.
    let path_parts: Option<(usize, Vec<BTreeMap<usize, f64>>)> =
        dual.path_potential.as_ref().map(|(i, g)| {
            let m = marginals[*i];
            let mut parts = alloc::vec![BTreeMap::new(); horizon];
            for t in 1..=horizon {
                for &node in m.level(t) {
                    let cur = m.cond_exp(node, |l| g[l]);
                    let prev = match m.node(node).parent {
                        None => 0.0,
                        Some(p) => m.cond_exp(p, |l| g[l]),
                    };
                    parts[t - 1].insert(node, cur - prev);
                }
            }
            (*i, parts)
        });

    // Scale-free zero threshold over every potential value in play.
    let mut sup = 0.0;
    for table in &dual.initial {
        for v in table.values() {
            sup = fmax(sup, fabs(*v));
        }
    }
    for v in dual.compensators.values() {
        sup = fmax(sup, fabs(*v));
    }
    if let Some((_, parts)) = &path_parts {
        for table in parts {
            for v in table.values() {
                sup = fmax(sup, fabs(*v));
            }
        }
    }
    let thr = INPUT_TOL * fmax(sup, 1.0);

    let mut cert = PolarCertificate {
        mode,
        slices: BTreeMap::new(),
        prefix_free_marginals: prefix_free.clone(),
    };

    // t = 1 slices: zero-level sets of the initial tables (for the
    // unconstrained side, of the conditional first-step expectation of
    // the path potential).
    for i in 0..n {
        let m = marginals[i];
        let admitted: Vec<usize> = m
            .level(1)
            .iter()
            .copied()
            .filter(|r| {
                let v = if let Some((pi, parts)) = &path_parts {
                    if *pi == i {
                        parts[0].get(r).copied().unwrap_or(0.0)
                    } else {
                        dual.initial[i].get(r).copied().unwrap_or(0.0)
                    }
                } else {
                    dual.initial[i].get(r).copied().unwrap_or(0.0)
                };
                fabs(v) <= thr
            })
            .collect();
        cert.slices.insert(
            SliceKey { marginal: i, t: 1, own_parent: None, others: Vec::new() },
            admitted,
        );
    }

    // Deeper slices, built forward so gluing membership of the
    // conditioning prefix can consult the earlier layers. Outside the
    // gluing the slice is the full child set, per the inductive
    // definition in the characterization.
    for t in 2..=horizon {
        for i in 0..n {
            let m = marginals[i];
            if prefix_free.contains(&i) {
                let parts = &path_parts.as_ref().expect("prefix-free side has a path potential").1;
                for &parent in m.level(t - 1) {
                    let in_gluing = own_prefix_in_gluing(&cert, m, i, parent, t - 1);
                    let admitted: Vec<usize> = m
                        .children(parent)
                        .iter()
                        .copied()
                        .filter(|c| {
                            !in_gluing
                                || fabs(parts[t - 1].get(c).copied().unwrap_or(0.0)) <= thr
                        })
                        .collect();
                    cert.slices.insert(
                        SliceKey { marginal: i, t, own_parent: Some(parent), others: Vec::new() },
                        admitted,
                    );
                }
                continue;
            }
            let other_idx: Vec<usize> = (0..n).filter(|&j| j != i).collect();
            for &parent in m.level(t - 1) {
                for u in crate::solver::node_tuples(marginals, &other_idx, t - 1) {
                    let mut full_tuple = Vec::new();
                    let mut ui = u.iter();
                    for j in 0..n {
                        if j == i {
                            full_tuple.push(parent);
                        } else {
                            full_tuple.push(*ui.next().unwrap());
                        }
                    }
                    let in_gluing = prefix_tuple_in_gluing(&cert, marginals, &full_tuple, t - 1);
                    let admitted: Vec<usize> = m
                        .children(parent)
                        .iter()
                        .copied()
                        .filter(|&c| {
                            if !in_gluing {
                                return true;
                            }
                            let key = CompensatorKey {
                                marginal: i,
                                t,
                                own_node: c,
                                others: u.clone(),
                            };
                            fabs(dual.compensators.get(&key).copied().unwrap_or(0.0)) <= thr
                        })
                        .collect();
                    cert.slices.insert(
                        SliceKey { marginal: i, t, own_parent: Some(parent), others: u },
                        admitted,
                    );
                }
            }
        }
    }

    // Structural verification: every slice kernel-full, and E avoided
    // by the gluing.
    for (key, admitted) in &cert.slices {
        let m = marginals[key.marginal];
        let mass: f64 = match key.own_parent {
            None => admitted.iter().map(|&r| m.node(r).cond_prob).sum(),
            Some(_) => admitted.iter().map(|&c| m.node(c).cond_prob).sum(),
        };
        if mass < 1.0 - INPUT_TOL {
            return Err(PolarError::CertificateFailed(format!(
                "slice {key:?} has kernel mass {mass}"
            )));
        }
    }
    for e in event {
        if cert.contains(marginals, e) {
            return Err(PolarError::CertificateFailed(format!(
                "event tuple {e:?} inside the gluing"
            )));
        }
    }
    Ok(cert)
}

/// Gluing membership of an own-side prefix only (used for slices that
/// may not depend on the other marginals).
fn own_prefix_in_gluing(
    cert: &PolarCertificate,
    m: &FilteredProcess,
    i: usize,
    node: usize,
    depth: usize,
) -> bool {
    for s in 1..=depth {
        let at_s = m.ancestor(node, s);
        let own_parent = if s == 1 { None } else { Some(m.ancestor(node, s - 1)) };
        let key = SliceKey { marginal: i, t: s, own_parent, others: Vec::new() };
        if let Some(admitted) = cert.slices.get(&key) {
            if !admitted.contains(&at_s) {
                return false;
            }
        }
    }
    true
}

/// Gluing membership of a full node tuple at the given depth.
fn prefix_tuple_in_gluing(
    cert: &PolarCertificate,
    marginals: &[&FilteredProcess],
    tuple: &[usize],
    depth: usize,
) -> bool {
    for s in 1..=depth {
        for (i, m) in marginals.iter().enumerate() {
            let at_s = m.ancestor(tuple[i], s);
            let own_parent = if s == 1 { None } else { Some(m.ancestor(tuple[i], s - 1)) };
            let others = if cert.prefix_free_marginals.contains(&i) || s == 1 {
                Vec::new()
            } else {
                (0..marginals.len())
                    .filter(|&j| j != i)
                    .map(|j| marginals[j].ancestor(tuple[j], s - 1))
                    .collect()
            };
            let key = SliceKey { marginal: i, t: s, own_parent, others };
            if let Some(admitted) = cert.slices.get(&key) {
                if !admitted.contains(&at_s) {
                    return false;
                }
            }
        }
    }
    true
}
