//! Finitely supported adapted processes as scenario trees.
//!
//! A [`FilteredProcess`] is a rooted forest of depth `T` (several roots
//! are allowed at time 1, their unconditional probabilities summing to
//! one). Node values are real vectors, edge weights conditional
//! probabilities. Leaf paths carry the path law; one-step transition
//! kernels are read off the tree by [`FilteredProcess::disintegrate`].

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use crate::error::ProcessError;
use crate::math::{fabs, fmax, quantize};
use crate::INPUT_TOL;

/// Raw node description used to build a process.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeSpec {
    pub id: String,
    pub t: usize,
    pub value: Vec<f64>,
    pub cond_prob: f64,
    pub parent: Option<String>,
}

#[derive(Debug, Clone)]
pub struct Node {
    pub id: String,
    pub t: usize,
    pub value: Vec<f64>,
    pub cond_prob: f64,
    pub parent: Option<usize>,
}

/// One-step transition kernel at a fixed time `t` in `2..=T`: for each
/// depth-`t-1` node, the conditional distribution over its children.
#[derive(Debug, Clone)]
pub struct TransitionKernel {
    pub t: usize,
    /// parent node index -> (child node index, probability)
    pub transitions: BTreeMap<usize, Vec<(usize, f64)>>,
}

/// Validated scenario tree. Immutable after construction.
#[derive(Debug, Clone)]
pub struct FilteredProcess {
    dimension: usize,
    horizon: usize,
    nodes: Vec<Node>,
    children: Vec<Vec<usize>>,
    levels: Vec<Vec<usize>>,
    /// leaf index -> node indices from t=1 to t=T
    paths: Vec<Vec<usize>>,
    path_probs: Vec<f64>,
    /// node index -> unconditional probability of reaching the node
    node_probs: Vec<f64>,
    /// node index -> leaf indices beneath (a leaf is beneath itself)
    node_leaves: Vec<Vec<usize>>,
    /// node index -> leaf index, for depth-T nodes
    leaf_of_node: BTreeMap<usize, usize>,
}

/// Martingale check result.
#[derive(Debug, Clone, PartialEq)]
pub struct MartingaleReport {
    pub ok: bool,
    pub worst_violation: f64,
    pub witness: Option<String>,
}

impl FilteredProcess {
    pub fn from_nodes(
        dimension: usize,
        horizon: usize,
        specs: Vec<NodeSpec>,
    ) -> Result<Self, ProcessError> {
        if dimension == 0 {
            return Err(ProcessError::Malformed("dimension must be positive".into()));
        }
        if horizon == 0 {
            return Err(ProcessError::Malformed("horizon must be positive".into()));
        }
        if specs.is_empty() {
            return Err(ProcessError::Malformed("empty node list".into()));
        }
        let mut index: BTreeMap<String, usize> = BTreeMap::new();
        for (i, s) in specs.iter().enumerate() {
            if index.insert(s.id.clone(), i).is_some() {
                return Err(ProcessError::Malformed(format!("duplicate node id '{}'", s.id)));
            }
        }
        let mut nodes = Vec::with_capacity(specs.len());
        for s in &specs {
            if s.t < 1 || s.t > horizon {
                return Err(ProcessError::InvalidTree(format!(
                    "node '{}' has time index {} outside 1..={}",
                    s.id, s.t, horizon
                )));
            }
            if s.value.len() != dimension {
                return Err(ProcessError::Malformed(format!(
                    "node '{}' has value of length {}, expected {}",
                    s.id,
                    s.value.len(),
                    dimension
                )));
            }
            if s.value.iter().any(|v| !v.is_finite()) {
                return Err(ProcessError::Malformed(format!(
                    "node '{}' has a non-finite value",
                    s.id
                )));
            }
            if !s.cond_prob.is_finite() || s.cond_prob < 0.0 {
                return Err(ProcessError::InvalidTree(format!(
                    "node '{}' has invalid probability {}",
                    s.id, s.cond_prob
                )));
            }
            if s.cond_prob == 0.0 {
                return Err(ProcessError::ZeroProbBranch(format!("node '{}'", s.id)));
            }
            if s.cond_prob > 1.0 + INPUT_TOL {
                return Err(ProcessError::InvalidTree(format!(
                    "node '{}' has probability {} > 1",
                    s.id, s.cond_prob
                )));
            }
            let parent = match (&s.parent, s.t) {
                (None, 1) => None,
                (None, _) => {
                    return Err(ProcessError::InvalidTree(format!(
                        "node '{}' at t={} has no parent",
                        s.id, s.t
                    )))
                }
                (Some(_), 1) => {
                    return Err(ProcessError::InvalidTree(format!(
                        "root node '{}' must not have a parent",
                        s.id
                    )))
                }
                (Some(p), _) => {
                    let pi = *index.get(p).ok_or_else(|| {
                        ProcessError::InvalidTree(format!(
                            "node '{}' references unknown parent '{}'",
                            s.id, p
                        ))
                    })?;
                    if specs[pi].t != s.t - 1 {
                        return Err(ProcessError::InvalidTree(format!(
                            "node '{}' at t={} has parent at t={}",
                            s.id, s.t, specs[pi].t
                        )));
                    }
                    Some(pi)
                }
            };
            nodes.push(Node {
                id: s.id.clone(),
                t: s.t,
                value: s.value.clone(),
                cond_prob: s.cond_prob,
                parent,
            });
        }

        let n = nodes.len();
        let mut children = vec![Vec::new(); n];
        for (i, node) in nodes.iter().enumerate() {
            if let Some(p) = node.parent {
                children[p].push(i);
            }
        }
        let mut levels = vec![Vec::new(); horizon];
        for (i, node) in nodes.iter().enumerate() {
            levels[node.t - 1].push(i);
        }
        if levels[0].is_empty() {
            return Err(ProcessError::InvalidTree("no time-1 nodes".into()));
        }
        // Branching structure: internal nodes need children, leaves must not have any.
        for (i, node) in nodes.iter().enumerate() {
            if node.t < horizon && children[i].is_empty() {
                return Err(ProcessError::InvalidTree(format!(
                    "node '{}' at t={} has no children",
                    node.id, node.t
                )));
            }
            if node.t == horizon && !children[i].is_empty() {
                return Err(ProcessError::InvalidTree(format!(
                    "terminal node '{}' has children",
                    node.id
                )));
            }
        }
        // Probability sums.
        let root_sum: f64 = levels[0].iter().map(|&i| nodes[i].cond_prob).sum();
        if fabs(root_sum - 1.0) > INPUT_TOL {
            return Err(ProcessError::InvalidTree(format!(
                "time-1 probabilities sum to {root_sum}, expected 1"
            )));
        }
        for (i, node) in nodes.iter().enumerate() {
            if node.t < horizon {
                let s: f64 = children[i].iter().map(|&c| nodes[c].cond_prob).sum();
                if fabs(s - 1.0) > INPUT_TOL {
                    return Err(ProcessError::InvalidTree(format!(
                        "children of '{}' have probabilities summing to {s}",
                        node.id
                    )));
                }
            }
        }

        let mut node_probs = vec![0.0; n];
        for t in 1..=horizon {
            for &i in &levels[t - 1] {
                node_probs[i] = match nodes[i].parent {
                    None => nodes[i].cond_prob,
                    Some(p) => node_probs[p] * nodes[i].cond_prob,
                };
            }
        }

        let mut paths = Vec::new();
        let mut path_probs = Vec::new();
        let mut leaf_of_node = BTreeMap::new();
        for &leaf in &levels[horizon - 1] {
            let mut path = vec![0usize; horizon];
            let mut cur = leaf;
            for t in (1..=horizon).rev() {
                path[t - 1] = cur;
                cur = nodes[cur].parent.unwrap_or(usize::MAX);
            }
            leaf_of_node.insert(leaf, paths.len());
            paths.push(path);
            path_probs.push(node_probs[leaf]);
        }

        let mut node_leaves = vec![Vec::new(); n];
        for (l, path) in paths.iter().enumerate() {
            for &i in path {
                node_leaves[i].push(l);
            }
        }

        Ok(FilteredProcess {
            dimension,
            horizon,
            nodes,
            children,
            levels,
            paths,
            path_probs,
            node_probs,
            node_leaves,
            leaf_of_node,
        })
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn node(&self, idx: usize) -> &Node {
        &self.nodes[idx]
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn children(&self, idx: usize) -> &[usize] {
        &self.children[idx]
    }

    /// Node indices at time `t` (1-based).
    pub fn level(&self, t: usize) -> &[usize] {
        &self.levels[t - 1]
    }

    pub fn leaf_count(&self) -> usize {
        self.paths.len()
    }

    /// Node indices along leaf path `l`, from t=1 to t=T.
    pub fn path(&self, l: usize) -> &[usize] {
        &self.paths[l]
    }

    pub fn path_prob(&self, l: usize) -> f64 {
        self.path_probs[l]
    }

    /// The node at depth `t` on leaf path `l`.
    pub fn prefix_node(&self, l: usize, t: usize) -> usize {
        self.paths[l][t - 1]
    }

    /// Unconditional probability of reaching node `idx`.
    pub fn node_prob(&self, idx: usize) -> f64 {
        self.node_probs[idx]
    }

    /// Ancestor of `idx` at depth `t` (`idx` itself at its own depth).
    pub fn ancestor(&self, idx: usize, t: usize) -> usize {
        let mut cur = idx;
        while self.nodes[cur].t > t {
            cur = self.nodes[cur].parent.expect("depth > t implies a parent");
        }
        cur
    }

    /// Leaf indices beneath node `idx`.
    pub fn leaves_under(&self, idx: usize) -> &[usize] {
        &self.node_leaves[idx]
    }

    /// Leaf index of a depth-T node.
    pub fn leaf_index(&self, node_idx: usize) -> Option<usize> {
        self.leaf_of_node.get(&node_idx).copied()
    }

    /// Leaf index whose node id is `id`, if any.
    pub fn leaf_by_id(&self, id: &str) -> Option<usize> {
        self.levels[self.horizon - 1]
            .iter()
            .find(|&&i| self.nodes[i].id == id)
            .and_then(|&i| self.leaf_index(i))
    }

    /// Path values of leaf `l` as a `T x d` sequence.
    pub fn path_values(&self, l: usize) -> Vec<&[f64]> {
        self.paths[l].iter().map(|&i| self.nodes[i].value.as_slice()).collect()
    }

    /// Conditional expectation of a leaf functional given node `idx`.
    pub fn cond_exp<F: FnMut(usize) -> f64>(&self, idx: usize, mut f: F) -> f64 {
        let mut acc = 0.0;
        for &l in &self.node_leaves[idx] {
            acc += self.path_probs[l] * f(l);
        }
        acc / self.node_probs[idx]
    }

    /// Expectation of a leaf functional under the path law.
    pub fn exp<F: FnMut(usize) -> f64>(&self, mut f: F) -> f64 {
        (0..self.leaf_count()).map(|l| self.path_probs[l] * f(l)).sum()
    }

    /// One-step transition kernel at time `t` in `2..=T`.
    pub fn disintegrate(&self, t: usize) -> Result<TransitionKernel, ProcessError> {
        if t < 2 || t > self.horizon {
            return Err(ProcessError::OutOfRange(format!(
                "kernel time {t} outside 2..={}",
                self.horizon
            )));
        }
        let mut transitions = BTreeMap::new();
        for &p in self.level(t - 1) {
            let dist: Vec<(usize, f64)> =
                self.children[p].iter().map(|&c| (c, self.nodes[c].cond_prob)).collect();
            transitions.insert(p, dist);
        }
        Ok(TransitionKernel { t, transitions })
    }

    /// The time-1 distribution over roots.
    pub fn initial_law(&self) -> Vec<(usize, f64)> {
        self.level(1).iter().map(|&i| (i, self.nodes[i].cond_prob)).collect()
    }

    /// Conditional-mean check at every internal node (and the time-0
    /// convention `x_0 = E[X_1]`, which holds by definition).
    pub fn is_martingale(&self) -> MartingaleReport {
        let mut worst = 0.0;
        let mut witness = None;
        for t in 1..self.horizon {
            for &i in self.level(t) {
                for k in 0..self.dimension {
                    let mean: f64 = self.children[i]
                        .iter()
                        .map(|&c| self.nodes[c].cond_prob * self.nodes[c].value[k])
                        .sum();
                    let dev = fabs(mean - self.nodes[i].value[k]);
                    if dev > worst {
                        worst = dev;
                        witness = Some(format!(
                            "node '{}' coordinate {k}: conditional mean {mean} vs value {}",
                            self.nodes[i].id, self.nodes[i].value[k]
                        ));
                    }
                }
            }
        }
        MartingaleReport { ok: worst <= INPUT_TOL, worst_violation: worst, witness }
    }

    /// Merge nodes that carry the same value and the same conditional
    /// law of the (already merged) future: the tree of the information
    /// process. The induced path law is unchanged and the operation is
    /// idempotent.
    pub fn canonicalize(&self) -> FilteredProcess {
        // Structural signature per node, built backward in time. The
        // signature encodes (quantized value, sorted multiset of
        // (quantized child probability, child signature)); nodes with
        // equal signatures have the same value and future law.
        let scale = 1e9;
        let n = self.nodes.len();
        let mut encodings: BTreeMap<Vec<i64>, u32> = BTreeMap::new();
        let mut sig_of_node = vec![0u32; n];
        // Representative data per signature id.
        let mut sig_value: Vec<Vec<f64>> = Vec::new();
        let mut sig_enc: Vec<Vec<i64>> = Vec::new();
        // child distribution as (child signature, summed probability)
        let mut sig_dist: Vec<Vec<(u32, f64)>> = Vec::new();

        for t in (1..=self.horizon).rev() {
            for &i in self.level(t) {
                // Group children by signature, summing probabilities.
                let mut grouped: BTreeMap<u32, f64> = BTreeMap::new();
                for &c in &self.children[i] {
                    *grouped.entry(sig_of_node[c]).or_insert(0.0) += self.nodes[c].cond_prob;
                }
                // Sort entries by the child's structural encoding so the
                // signature does not depend on input node order.
                let mut entries: Vec<(u32, f64)> = grouped.into_iter().collect();
                entries.sort_by(|a, b| sig_enc[a.0 as usize].cmp(&sig_enc[b.0 as usize]));

                let mut enc: Vec<i64> = Vec::new();
                enc.push(self.nodes[i].value.len() as i64);
                for v in &self.nodes[i].value {
                    enc.push(quantize(*v, scale));
                }
                enc.push(entries.len() as i64);
                for (sig, p) in &entries {
                    enc.push(quantize(*p, scale));
                    enc.extend_from_slice(&sig_enc[*sig as usize]);
                }

                let next = encodings.len() as u32;
                let sig = *encodings.entry(enc.clone()).or_insert(next);
                if sig == next {
                    sig_value.push(self.nodes[i].value.clone());
                    sig_enc.push(enc);
                    sig_dist.push(entries);
                }
                sig_of_node[i] = sig;
            }
        }

        // Rebuild: group roots by signature (summing probabilities),
        // then expand each signature's representative distribution.
        let mut specs: Vec<NodeSpec> = Vec::new();
        let mut counter = 0usize;
        let fresh = |counter: &mut usize| {
            let id = format!("n{counter}");
            *counter += 1;
            id
        };

        let mut root_groups: BTreeMap<u32, f64> = BTreeMap::new();
        for &i in self.level(1) {
            *root_groups.entry(sig_of_node[i]).or_insert(0.0) += self.nodes[i].cond_prob;
        }
        let mut roots: Vec<(u32, f64)> = root_groups.into_iter().collect();
        roots.sort_by(|a, b| sig_enc[a.0 as usize].cmp(&sig_enc[b.0 as usize]));

        // Depth-first expansion of (signature, prob, parent id).
        let mut stack: Vec<(u32, f64, Option<String>, usize)> = Vec::new();
        for (sig, p) in roots.into_iter().rev() {
            stack.push((sig, p, None, 1));
        }
        while let Some((sig, prob, parent, t)) = stack.pop() {
            let id = fresh(&mut counter);
            specs.push(NodeSpec {
                id: id.clone(),
                t,
                value: sig_value[sig as usize].clone(),
                cond_prob: prob,
                parent,
            });
            for &(child_sig, p) in sig_dist[sig as usize].iter().rev() {
                stack.push((child_sig, p, Some(id.clone()), t + 1));
            }
        }

        FilteredProcess::from_nodes(self.dimension, self.horizon, specs)
            .expect("canonicalized tree is valid by construction")
    }

    /// Node-id-insensitive structural equality (same canonical form).
    pub fn same_tree(&self, other: &FilteredProcess) -> bool {
        if self.dimension != other.dimension || self.horizon != other.horizon {
            return false;
        }
        let a = self.canonicalize();
        let b = other.canonicalize();
        if a.node_count() != b.node_count() {
            return false;
        }
        // Canonical rebuild is deterministic, so node order matches.
        a.nodes.iter().zip(b.nodes.iter()).all(|(x, y)| {
            x.t == y.t
                && x.parent == y.parent
                && fabs(x.cond_prob - y.cond_prob) <= INPUT_TOL
                && x.value
                    .iter()
                    .zip(y.value.iter())
                    .all(|(u, v)| fabs(u - v) <= INPUT_TOL)
        })
    }

    /// Max deviation between stored path probabilities and the product
    /// of the time-1 law with the one-step kernels.
    pub fn reconstruction_error(&self) -> f64 {
        let mut worst = 0.0;
        for l in 0..self.leaf_count() {
            let mut p = 1.0;
            for &i in &self.paths[l] {
                p *= self.nodes[i].cond_prob;
            }
            worst = fmax(worst, fabs(p - self.path_probs[l]));
        }
        worst
    }
}

/// Convenience constructor used widely in tests and generators: build a
/// tree from explicit paths `(values, probability)`, sharing prefixes
/// with equal values.
pub fn process_from_paths(
    dimension: usize,
    horizon: usize,
    paths: &[(Vec<Vec<f64>>, f64)],
) -> Result<FilteredProcess, ProcessError> {
    let scale = 1e9;
    let mut specs: Vec<NodeSpec> = Vec::new();
    // prefix key -> (node id, accumulated unconditional prob)
    let mut nodes: BTreeMap<Vec<Vec<i64>>, (String, f64)> = BTreeMap::new();
    for (values, prob) in paths {
        if values.len() != horizon {
            return Err(ProcessError::Malformed("path length != horizon".to_string()));
        }
        let mut key: Vec<Vec<i64>> = Vec::new();
        for v in values {
            key.push(v.iter().map(|x| quantize(*x, scale)).collect());
            let t = key.len();
            if !nodes.contains_key(&key) {
                let id = format!("p{}", nodes.len());
                let parent = if t == 1 {
                    None
                } else {
                    Some(nodes[&key[..t - 1]].0.clone())
                };
                specs.push(NodeSpec {
                    id: id.clone(),
                    t,
                    value: v.clone(),
                    cond_prob: 0.0,
                    parent,
                });
                nodes.insert(key.clone(), (id, 0.0));
            }
            nodes.get_mut(&key).unwrap().1 += prob;
        }
    }
    // Turn accumulated unconditional probabilities into conditional ones.
    let mut uncond: BTreeMap<String, f64> = BTreeMap::new();
    for (key, (id, p)) in &nodes {
        let _ = key;
        uncond.insert(id.clone(), *p);
    }
    for spec in &mut specs {
        let p = uncond[&spec.id];
        spec.cond_prob = match &spec.parent {
            None => p,
            Some(par) => p / uncond[par],
        };
    }
    FilteredProcess::from_nodes(dimension, horizon, specs)
}
