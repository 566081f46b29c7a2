//! Backward dynamic programming for bicausal transport.
//!
//! `V_T := c` on leaf pairs; going backward, `V_{t−1}(x_{1:t−1},
//! y_{1:t−1})` is the optimal one-step transport between the pair's
//! kernels with cost `V_t`, and `V_0` couples the time-1 laws. Gluing
//! the locally optimal one-step plans yields a globally optimal bicausal
//! coupling, and telescoping the local dual potentials yields a
//! structured dual achieving `V_0`.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec::Vec;

use crate::cost::CostFunction;
use crate::coupling::{Coupling, CouplingReport, Mode};
use crate::dual::{CompensatorKey, DualPotential};
use crate::error::SolveError;
use crate::math::{fabs, fmax};
use crate::process::FilteredProcess;
use crate::transport::solve_transport;
use crate::DERIVED_TOL;

/// The value process `V_t` on node pairs, `t = 1..T`, plus the scalar
/// `V_0`.
#[derive(Debug, Clone)]
pub struct ValueProcess {
    pub v0: f64,
    /// `tables[t−1]`: (X-node at depth t, Y-node at depth t) → `V_t`.
    pub tables: Vec<BTreeMap<(usize, usize), f64>>,
}

impl ValueProcess {
    pub fn horizon(&self) -> usize {
        self.tables.len()
    }

    pub fn get(&self, t: usize, x: usize, y: usize) -> f64 {
        self.tables[t - 1][&(x, y)]
    }
}

/// One-step dual potentials at a prefix pair: `φ` over the X-children,
/// `ψ` over the Y-children (time-1 nodes for the root solve).
pub type LocalDual = (Vec<(usize, f64)>, Vec<(usize, f64)>);

#[derive(Debug, Clone)]
pub struct BicausalSolution {
    pub value: f64,
    pub value_process: ValueProcess,
    pub coupling: Coupling,
    /// `(φ_1, ψ_1)` from the root transport solve over the time-1 laws.
    pub root_dual: LocalDual,
    /// Per prefix pair at depth `t−1`, the step-`t` transport duals.
    pub local_duals: BTreeMap<(usize, usize), LocalDual>,
    pub lp_iterations: usize,
}

struct Recursion {
    value_process: ValueProcess,
    root_dual: LocalDual,
    local_duals: BTreeMap<(usize, usize), LocalDual>,
    /// Optimal one-step plans: root plan over time-1 pairs, and per
    /// prefix pair the plan over children pairs.
    root_plan: Vec<((usize, usize), f64)>,
    local_plans: BTreeMap<(usize, usize), Vec<((usize, usize), f64)>>,
    iterations: usize,
}

fn backward(
    x: &FilteredProcess,
    y: &FilteredProcess,
    c: &CostFunction,
) -> Result<Recursion, SolveError> {
    if x.horizon() != y.horizon() {
        return Err(SolveError::HorizonMismatch(format!(
            "{} vs {}",
            x.horizon(),
            y.horizon()
        )));
    }
    let horizon = x.horizon();
    let mut tables: Vec<BTreeMap<(usize, usize), f64>> = alloc::vec![BTreeMap::new(); horizon];

    // V_T = c on leaf pairs.
    for lx in 0..x.leaf_count() {
        for ly in 0..y.leaf_count() {
            let nx = x.path(lx)[horizon - 1];
            let ny = y.path(ly)[horizon - 1];
            tables[horizon - 1].insert((nx, ny), c.eval(&[x, y], &[lx, ly])?);
        }
    }

    let mut local_duals = BTreeMap::new();
    let mut local_plans = BTreeMap::new();
    let mut iterations = 0;

    for t in (2..=horizon).rev() {
        let (next, rest) = {
            let (a, b) = tables.split_at_mut(t - 1);
            (&b[0], &mut a[t - 2])
        };
        for &px in x.level(t - 1) {
            let xc = x.children(px);
            let p: Vec<f64> = xc.iter().map(|&i| x.node(i).cond_prob).collect();
            for &py in y.level(t - 1) {
                let yc = y.children(py);
                let q: Vec<f64> = yc.iter().map(|&i| y.node(i).cond_prob).collect();
                let cost: Vec<Vec<f64>> = xc
                    .iter()
                    .map(|&a| yc.iter().map(|&b| next[&(a, b)]).collect())
                    .collect();
                let sol = solve_transport(&p, &q, &cost)?;
                iterations += sol.iterations;
                rest.insert((px, py), sol.value);
                local_duals.insert(
                    (px, py),
                    (
                        xc.iter().copied().zip(sol.phi.iter().copied()).collect(),
                        yc.iter().copied().zip(sol.psi.iter().copied()).collect(),
                    ),
                );
                let mut plan = Vec::new();
                for (a, &na) in xc.iter().enumerate() {
                    for (b, &nb) in yc.iter().enumerate() {
                        if sol.plan[a][b] > 0.0 {
                            plan.push(((na, nb), sol.plan[a][b]));
                        }
                    }
                }
                local_plans.insert((px, py), plan);
            }
        }
    }

    // Root solve over the time-1 laws.
    let xr: Vec<(usize, f64)> = x.initial_law();
    let yr: Vec<(usize, f64)> = y.initial_law();
    let p: Vec<f64> = xr.iter().map(|&(_, v)| v).collect();
    let q: Vec<f64> = yr.iter().map(|&(_, v)| v).collect();
    let cost: Vec<Vec<f64>> = xr
        .iter()
        .map(|&(a, _)| yr.iter().map(|&(b, _)| tables[0][&(a, b)]).collect())
        .collect();
    let sol = solve_transport(&p, &q, &cost)?;
    iterations += sol.iterations;
    let mut root_plan = Vec::new();
    for (a, &(na, _)) in xr.iter().enumerate() {
        for (b, &(nb, _)) in yr.iter().enumerate() {
            if sol.plan[a][b] > 0.0 {
                root_plan.push(((na, nb), sol.plan[a][b]));
            }
        }
    }
    let root_dual = (
        xr.iter().map(|&(n, _)| n).zip(sol.phi.iter().copied()).collect(),
        yr.iter().map(|&(n, _)| n).zip(sol.psi.iter().copied()).collect(),
    );

    Ok(Recursion {
        value_process: ValueProcess { v0: sol.value, tables },
        root_dual,
        local_duals,
        root_plan,
        local_plans,
        iterations,
    })
}

/// The value process alone, without coupling assembly.
pub fn value_process(
    x: &FilteredProcess,
    y: &FilteredProcess,
    c: &CostFunction,
) -> Result<ValueProcess, SolveError> {
    Ok(backward(x, y, c)?.value_process)
}

pub fn solve_bicausal(
    x: &FilteredProcess,
    y: &FilteredProcess,
    c: &CostFunction,
) -> Result<BicausalSolution, SolveError> {
    let rec = backward(x, y, c)?;
    let horizon = x.horizon();

    // Glue the one-step plans forward into leaf-tuple masses.
    let mut front: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    for &((a, b), p) in &rec.root_plan {
        *front.entry((a, b)).or_insert(0.0) += p;
    }
    for _t in 2..=horizon {
        let mut next: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        for (&(a, b), &p) in &front {
            for &((ca, cb), q) in &rec.local_plans[&(a, b)] {
                *next.entry((ca, cb)).or_insert(0.0) += p * q;
            }
        }
        front = next;
    }
    let mut mass = BTreeMap::new();
    for ((na, nb), p) in front {
        let lx = x.leaf_index(na).expect("depth-T node");
        let ly = y.leaf_index(nb).expect("depth-T node");
        mass.insert(alloc::vec![lx, ly], p);
    }
    let coupling = Coupling::new(alloc::vec![x.clone(), y.clone()], mass)
        .map_err(|e| SolveError::NumericalFailure(format!("assembled coupling: {e}")))?;

    Ok(BicausalSolution {
        value: rec.value_process.v0,
        value_process: rec.value_process,
        coupling,
        root_dual: rec.root_dual,
        local_duals: rec.local_duals,
        lp_iterations: rec.iterations,
    })
}

/// Check the sub/martingale property of the value process along a
/// coupling: for every support prefix pair, the conditional expectation
/// of `V_{t+1}` under the coupling's one-step law against `V_t`
/// (`V_0` against the unconditional time-1 expectation).
pub fn verify_value_martingale(
    v: &ValueProcess,
    pi: &Coupling,
    martingale: bool,
) -> Result<CouplingReport, SolveError> {
    if pi.marginals.len() != 2 {
        return Err(SolveError::MarginalMismatch(format!(
            "{} marginals, expected 2",
            pi.marginals.len()
        )));
    }
    if pi.marginals[0].horizon() != v.horizon() {
        return Err(SolveError::MarginalMismatch(format!(
            "value process horizon {} vs coupling horizon {}",
            v.horizon(),
            pi.marginals[0].horizon()
        )));
    }
    let horizon = v.horizon();
    let mut worst = 0.0;
    let mut witness = None;
    for t in 0..horizon {
        let cond = pi.disintegrate(t + 1);
        for (prefix, dist) in cond {
            let prev = if t == 0 {
                v.v0
            } else {
                v.get(t, prefix[0], prefix[1])
            };
            let mut exp = 0.0;
            for (cur, p) in &dist {
                exp += p * v.get(t + 1, cur[0], cur[1]);
            }
            let dev = if martingale { fabs(exp - prev) } else { fmax(0.0, prev - exp) };
            if dev > worst {
                worst = dev;
                witness = Some(format!(
                    "t={t}, prefix pair {prefix:?}: E[V_{}] = {exp} vs V_{t} = {prev}",
                    t + 1
                ));
            }
        }
    }
    Ok(CouplingReport {
        ok: worst <= DERIVED_TOL,
        mode: Mode::Bicausal,
        worst_violation: worst,
        witness,
    })
}

/// Telescope the one-step duals into a structured bicausal potential:
/// `f_1 = φ_1`, `g_1 = ψ_1`, and for `t ≥ 2` the compensators
/// `f_t = φ_t − ∫φ_t dK^X`, `g_t = ψ_t − ∫ψ_t dK^Y` per prefix pair.
/// Verified before returning: zero compensator means, `s ≤ c`, dual
/// value `= V_0`, and the running sum matching `V` on the optimal
/// support.
pub fn dual_from_value(
    x: &FilteredProcess,
    y: &FilteredProcess,
    c: &CostFunction,
    sol: &BicausalSolution,
) -> Result<DualPotential, SolveError> {
    let mut initial = alloc::vec![BTreeMap::new(), BTreeMap::new()];
    for &(n, v) in &sol.root_dual.0 {
        initial[0].insert(n, v);
    }
    for &(n, v) in &sol.root_dual.1 {
        initial[1].insert(n, v);
    }
    let mut compensators = BTreeMap::new();
    for (&(px, py), (phi, psi)) in &sol.local_duals {
        let t = x.node(px).t + 1;
        let mean_phi: f64 = phi.iter().map(|&(n, v)| x.node(n).cond_prob * v).sum();
        let mean_psi: f64 = psi.iter().map(|&(n, v)| y.node(n).cond_prob * v).sum();
        for &(n, v) in phi {
            compensators.insert(
                CompensatorKey { marginal: 0, t, own_node: n, others: alloc::vec![py] },
                v - mean_phi,
            );
        }
        for &(n, v) in psi {
            compensators.insert(
                CompensatorKey { marginal: 1, t, own_node: n, others: alloc::vec![px] },
                v - mean_psi,
            );
        }
    }
    let mut dual = DualPotential {
        mode: Mode::Bicausal,
        initial,
        path_potential: None,
        compensators,
    };
    dual.recenter(&[x, y]);
    dual.verify(&[x, y], c, sol.value)?;

    // Running-sum check on the optimal support: since each stored
    // compensator pair carries φ_t + ψ_t − V_{t−1} and complementary
    // slackness gives φ_t + ψ_t = V_t there, the partial sums of the
    // potential terms coincide with the value process.
    for (tuple, _) in &sol.coupling.mass {
        let (lx, ly) = (tuple[0], tuple[1]);
        let mut running = dual.initial[0][&x.prefix_node(lx, 1)]
            + dual.initial[1][&y.prefix_node(ly, 1)];
        for t in 1..=x.horizon() {
            if t >= 2 {
                for (marginal, own, other) in [
                    (0, x.prefix_node(lx, t), y.prefix_node(ly, t - 1)),
                    (1, y.prefix_node(ly, t), x.prefix_node(lx, t - 1)),
                ] {
                    let key = CompensatorKey {
                        marginal,
                        t,
                        own_node: own,
                        others: alloc::vec![other],
                    };
                    running += dual.compensators.get(&key).copied().unwrap_or(0.0);
                }
            }
            let vt = sol.value_process.get(t, x.prefix_node(lx, t), y.prefix_node(ly, t));
            let dev = fabs(running - vt);
            if dev > crate::DUAL_TOL {
                return Err(SolveError::DualVerificationFailed(format!(
                    "running dual sum {running} vs V_{t} = {vt} on support tuple {tuple:?}"
                )));
            }
        }
    }
    Ok(dual)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::process::process_from_paths;

    fn two_step(paths: &[(Vec<f64>, f64)]) -> FilteredProcess {
        let full: Vec<(Vec<Vec<f64>>, f64)> = paths
            .iter()
            .map(|(vals, p)| (vals.iter().map(|&v| alloc::vec![v]).collect(), *p))
            .collect();
        process_from_paths(1, 2, &full).unwrap()
    }

    fn example2() -> (FilteredProcess, FilteredProcess) {
        let x = two_step(&[(alloc::vec![0.0, 1.0], 0.5), (alloc::vec![0.0, -1.0], 0.5)]);
        let y = two_step(&[(alloc::vec![0.0, 2.0], 0.5), (alloc::vec![0.0, -2.0], 0.5)]);
        (x, y)
    }

    fn gap_pair() -> (FilteredProcess, FilteredProcess) {
        let x = two_step(&[(alloc::vec![1.0, 1.0], 0.5), (alloc::vec![-1.0, -1.0], 0.5)]);
        let y = two_step(&[(alloc::vec![0.0, 1.0], 0.5), (alloc::vec![0.0, -1.0], 0.5)]);
        (x, y)
    }

    /// |x_2 − y_2| as a table over leaf pairs.
    fn terminal_l1(x: &FilteredProcess, y: &FilteredProcess) -> CostFunction {
        let mut table = BTreeMap::new();
        for lx in 0..x.leaf_count() {
            for ly in 0..y.leaf_count() {
                let d = (x.path_values(lx)[1][0] - y.path_values(ly)[1][0]).abs();
                table.insert(alloc::vec![lx, ly], d);
            }
        }
        CostFunction::Table(table)
    }

    #[test]
    fn identical_diracs_cost_zero() {
        let d = two_step(&[(alloc::vec![0.0, 0.0], 1.0)]);
        let sol = solve_bicausal(&d, &d, &CostFunction::LpSum { p: 1 }).unwrap();
        assert!(sol.value.abs() < 1e-12);
        assert!(sol.coupling.check(Mode::Bicausal).ok);
    }

    #[test]
    fn example2_value_one() {
        let (x, y) = example2();
        let sol = solve_bicausal(&x, &y, &CostFunction::LpSum { p: 1 }).unwrap();
        assert!((sol.value - 1.0).abs() < 1e-10, "value {}", sol.value);
        assert!(sol.coupling.check(Mode::Bicausal).ok);
        let ec = sol.coupling.expected_cost(&CostFunction::LpSum { p: 1 }).unwrap();
        assert!((ec - sol.value).abs() < 1e-10);
        // hand recursion: V_1(root, root) = 1, V_0 = 1
        let rx = x.level(1)[0];
        let ry = y.level(1)[0];
        assert!((sol.value_process.get(1, rx, ry) - 1.0).abs() < 1e-10);
    }

    #[test]
    fn gap_instance_bicausal_value_one() {
        let (x, y) = gap_pair();
        let c = terminal_l1(&x, &y);
        let sol = solve_bicausal(&x, &y, &c).unwrap();
        assert!((sol.value - 1.0).abs() < 1e-10, "value {}", sol.value);
    }

    #[test]
    fn value_process_horizon_one() {
        let a = process_from_paths(
            1,
            1,
            &[(alloc::vec![alloc::vec![1.0]], 0.5), (alloc::vec![alloc::vec![-1.0]], 0.5)],
        )
        .unwrap();
        let b = process_from_paths(
            1,
            1,
            &[(alloc::vec![alloc::vec![2.0]], 0.5), (alloc::vec![alloc::vec![-2.0]], 0.5)],
        )
        .unwrap();
        let v = value_process(&a, &b, &CostFunction::LpSum { p: 1 }).unwrap();
        assert_eq!(v.horizon(), 1);
        assert!((v.v0 - 1.0).abs() < 1e-10);
    }

    #[test]
    fn value_bounds_from_cost_bounds() {
        let (x, y) = example2();
        let v = value_process(&x, &y, &CostFunction::LpSum { p: 1 }).unwrap();
        // cost range over leaf pairs is [1, 3]
        for table in &v.tables {
            for &val in table.values() {
                assert!((1.0..=3.0).contains(&val) || val.abs() < 3.0 + 1e-9);
            }
        }
        assert!(v.v0 >= 1.0 - 1e-9 && v.v0 <= 3.0 + 1e-9);
    }

    #[test]
    fn horizon_mismatch_rejected() {
        let d1 = process_from_paths(1, 1, &[(alloc::vec![alloc::vec![0.0]], 1.0)]).unwrap();
        let d2 = two_step(&[(alloc::vec![0.0, 0.0], 1.0)]);
        assert!(matches!(
            solve_bicausal(&d1, &d2, &CostFunction::LpSum { p: 1 }),
            Err(SolveError::HorizonMismatch(_))
        ));
    }

    #[test]
    fn optimal_coupling_is_value_martingale() {
        let (x, y) = gap_pair();
        let c = terminal_l1(&x, &y);
        let sol = solve_bicausal(&x, &y, &c).unwrap();
        let r = verify_value_martingale(&sol.value_process, &sol.coupling, true).unwrap();
        assert!(r.ok, "{r:?}");
        let r = verify_value_martingale(&sol.value_process, &sol.coupling, false).unwrap();
        assert!(r.ok);
    }

    #[test]
    fn product_coupling_is_value_submartingale() {
        let (x, y) = gap_pair();
        let c = terminal_l1(&x, &y);
        let sol = solve_bicausal(&x, &y, &c).unwrap();
        let prod = Coupling::product(&[&x, &y]);
        let r = verify_value_martingale(&sol.value_process, &prod, false).unwrap();
        assert!(r.ok, "{r:?}");
    }

    #[test]
    fn dual_achieves_primal() {
        let (x, y) = example2();
        let c = CostFunction::LpSum { p: 1 };
        let sol = solve_bicausal(&x, &y, &c).unwrap();
        let d = dual_from_value(&x, &y, &c, &sol).unwrap();
        assert!((d.value(&[&x, &y]) - sol.value).abs() < 1e-8);
        assert!(d.worst_feasibility(&[&x, &y], &c).unwrap() <= 1e-7);
    }

    #[test]
    fn dual_dirac_equals_cost() {
        let d0 = two_step(&[(alloc::vec![0.0, 0.0], 1.0)]);
        let d2 = two_step(&[(alloc::vec![0.0, 2.0], 1.0)]);
        let c = CostFunction::LpSum { p: 1 };
        let sol = solve_bicausal(&d0, &d2, &c).unwrap();
        let dual = dual_from_value(&d0, &d2, &c, &sol).unwrap();
        assert!((sol.value - 2.0).abs() < 1e-12);
        assert!((dual.evaluate(&[&d0, &d2], &[0, 0]) - 2.0).abs() < 1e-8);
    }

    #[test]
    fn aw_self_distance_zero() {
        let (x, _) = gap_pair();
        let sol = solve_bicausal(&x, &x, &CostFunction::LpSum { p: 1 }).unwrap();
        assert!(sol.value.abs() < 1e-10);
    }
}
