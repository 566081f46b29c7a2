//! Seeded random instance generators shared by `adot selftest` and the
//! acceptance suite. All randomness flows through the caller's RNG so
//! runs are reproducible from a single seed.

use std::collections::BTreeMap;

use rand::Rng;

use adot_core::hedging::Payoff;
use adot_core::process::NodeSpec;
use adot_core::{Coupling, FilteredProcess};

/// Random scenario tree with the given horizon and value dimension; at
/// most `max_children` children per node, branch probabilities bounded
/// away from zero.
pub fn random_tree<R: Rng>(
    rng: &mut R,
    horizon: usize,
    max_children: usize,
    dim: usize,
) -> FilteredProcess {
    let mut specs: Vec<NodeSpec> = Vec::new();
    let mut next_id = 0usize;
    let mut frontier: Vec<String> = Vec::new();

    let value = |rng: &mut R| (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect::<Vec<f64>>();
    let split = |rng: &mut R, k: usize| {
        let raw: Vec<f64> = (0..k).map(|_| rng.gen_range(0.2..1.0)).collect();
        let total: f64 = raw.iter().sum();
        raw.into_iter().map(|w| w / total).collect::<Vec<f64>>()
    };

    let roots = rng.gen_range(1..=max_children);
    for p in split(rng, roots) {
        let id = format!("n{next_id}");
        next_id += 1;
        specs.push(NodeSpec { id: id.clone(), t: 1, value: value(rng), cond_prob: p, parent: None });
        frontier.push(id);
    }
    for t in 2..=horizon {
        let mut next = Vec::new();
        for parent in &frontier {
            let k = rng.gen_range(1..=max_children);
            for p in split(rng, k) {
                let id = format!("n{next_id}");
                next_id += 1;
                specs.push(NodeSpec {
                    id: id.clone(),
                    t,
                    value: value(rng),
                    cond_prob: p,
                    parent: Some(parent.clone()),
                });
                next.push(id);
            }
        }
        frontier = next;
    }
    FilteredProcess::from_nodes(dim, horizon, specs).expect("generated tree is valid")
}

/// Random recombining-free binomial martingale: one root, two children
/// per node with additive up/down moves and the unique martingale
/// branch probability.
pub fn random_binomial_martingale<R: Rng>(rng: &mut R, horizon: usize) -> FilteredProcess {
    let mut specs: Vec<NodeSpec> = Vec::new();
    let mut next_id = 0usize;
    let s0 = rng.gen_range(0.5..2.0);
    let root = format!("n{next_id}");
    next_id += 1;
    specs.push(NodeSpec { id: root.clone(), t: 1, value: vec![s0], cond_prob: 1.0, parent: None });
    let mut frontier = vec![(root, s0)];
    for t in 2..=horizon {
        let mut next = Vec::new();
        for (parent, s) in &frontier {
            let u = rng.gen_range(0.1..1.0);
            let d = -rng.gen_range(0.1..1.0);
            let p_up = -d / (u - d);
            for (step, p) in [(u, p_up), (d, 1.0 - p_up)] {
                let id = format!("n{next_id}");
                next_id += 1;
                specs.push(NodeSpec {
                    id: id.clone(),
                    t,
                    value: vec![s + step],
                    cond_prob: p,
                    parent: Some(parent.clone()),
                });
                next.push((id, s + step));
            }
        }
        frontier = next;
    }
    FilteredProcess::from_nodes(1, horizon, specs).expect("generated martingale is valid")
}

/// Random coupling of two discrete laws: northwest-corner allocation
/// under shuffled orders; marginals are matched exactly.
fn random_two_coupling<R: Rng>(
    rng: &mut R,
    mut p: Vec<(usize, f64)>,
    mut q: Vec<(usize, f64)>,
) -> Vec<((usize, usize), f64)> {
    for list in [&mut p, &mut q] {
        for i in (1..list.len()).rev() {
            list.swap(i, rng.gen_range(0..=i));
        }
    }
    let mut out = Vec::new();
    let (mut i, mut j) = (0, 0);
    while i < p.len() && j < q.len() {
        let m = p[i].1.min(q[j].1);
        if m > 1e-15 {
            out.push(((p[i].0, q[j].0), m));
        }
        p[i].1 -= m;
        q[j].1 -= m;
        if p[i].1 <= 1e-15 {
            i += 1;
        }
        if j < q.len() && q[j].1 <= 1e-15 {
            j += 1;
        }
    }
    out
}

fn conditional_law(m: &FilteredProcess, node: usize) -> Vec<(usize, f64)> {
    let pmass = m.node_prob(node);
    m.children(node).iter().map(|&c| (c, m.node_prob(c) / pmass)).collect()
}

/// Random bicausal coupling of two processes of equal horizon, built by
/// gluing independent random one-step couplings over matched prefixes.
pub fn random_bicausal_coupling<R: Rng>(
    rng: &mut R,
    x: &FilteredProcess,
    y: &FilteredProcess,
) -> Coupling {
    let horizon = x.horizon();
    let mut front: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    for ((a, b), m) in random_two_coupling(rng, x.initial_law(), y.initial_law()) {
        *front.entry((a, b)).or_insert(0.0) += m;
    }
    for _t in 2..=horizon {
        let mut next: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        for (&(a, b), &m) in &front {
            let step =
                random_two_coupling(rng, conditional_law(x, a), conditional_law(y, b));
            for ((ca, cb), q) in step {
                *next.entry((ca, cb)).or_insert(0.0) += m * q;
            }
        }
        front = next;
    }
    let mut mass = BTreeMap::new();
    for ((a, b), m) in front {
        let tuple = vec![x.leaf_index(a).unwrap(), y.leaf_index(b).unwrap()];
        *mass.entry(tuple).or_insert(0.0) += m;
    }
    Coupling::new(vec![x.clone(), y.clone()], mass).expect("glued coupling is valid")
}

/// Random (generally non-causal) coupling of `N` processes with exact
/// marginals: repeatedly pick one leaf with remaining mass per marginal
/// and allocate the minimum remainder.
pub fn random_coupling<R: Rng>(rng: &mut R, marginals: &[&FilteredProcess]) -> Coupling {
    let mut remaining: Vec<Vec<f64>> = marginals
        .iter()
        .map(|m| (0..m.leaf_count()).map(|l| m.path_prob(l)).collect())
        .collect();
    let mut mass: BTreeMap<Vec<usize>, f64> = BTreeMap::new();
    loop {
        let mut tuple = Vec::with_capacity(marginals.len());
        let mut alloc = f64::INFINITY;
        for rem in &remaining {
            let live: Vec<usize> =
                (0..rem.len()).filter(|&l| rem[l] > 1e-12).collect();
            if live.is_empty() {
                let total: f64 = mass.values().sum();
                assert!((total - 1.0).abs() < 1e-9, "allocation drift {total}");
                return Coupling::new(
                    marginals.iter().map(|&m| m.clone()).collect(),
                    mass,
                )
                .expect("allocated coupling is valid");
            }
            let l = live[rng.gen_range(0..live.len())];
            alloc = alloc.min(rem[l]);
            tuple.push(l);
        }
        for (rem, &l) in remaining.iter_mut().zip(tuple.iter()) {
            rem[l] -= alloc;
        }
        *mass.entry(tuple).or_insert(0.0) += alloc;
    }
}

/// Random bounded table payoff over all leaf tuples.
pub fn random_payoff<R: Rng>(rng: &mut R, marginals: &[&FilteredProcess]) -> Payoff {
    let mut entries = BTreeMap::new();
    let mut tuple = vec![0usize; marginals.len()];
    loop {
        entries.insert(tuple.clone(), rng.gen_range(-1.0..1.0));
        let mut k = marginals.len();
        loop {
            if k == 0 {
                return Payoff { entries, bounds: None };
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

/// `count` distinct random candidate paths of shape `T × d`.
pub fn random_candidate_paths<R: Rng>(
    rng: &mut R,
    horizon: usize,
    dim: usize,
    count: usize,
) -> Vec<Vec<Vec<f64>>> {
    (0..count)
        .map(|_| {
            (0..horizon)
                .map(|_| (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect())
                .collect()
        })
        .collect()
}
