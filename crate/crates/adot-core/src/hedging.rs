//! Robust superhedging of multi-asset payoffs when the joint dynamics
//! are unknown: no-arbitrage check, pricing via multicausal transport,
//! strategy extraction from the structured dual.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::cost::CostFunction;
use crate::coupling::{Coupling, Mode};
use crate::dual::{CompensatorKey, DualPotential};
use crate::error::HedgeError;
use crate::math::{fabs, fmax};
use crate::process::FilteredProcess;
use crate::solver::{node_tuples, solve_adapted_lp, AdaptedSolution};
use crate::{DERIVED_TOL, DUAL_TOL};

/// Payoff table over tuples of leaf paths, with optional per-marginal
/// growth-bound witnesses `ℓ^i` dominating `ξ ≤ Σ_i ℓ^i`.
#[derive(Debug, Clone)]
pub struct Payoff {
    pub entries: BTreeMap<Vec<usize>, f64>,
    pub bounds: Option<Vec<Vec<f64>>>,
}

impl Payoff {
    pub fn validate(&self, marginals: &[&FilteredProcess]) -> Result<(), HedgeError> {
        let n = marginals.len();
        for (tuple, &v) in &self.entries {
            if tuple.len() != n {
                return Err(HedgeError::BadPayoff(format!(
                    "tuple of length {}, expected {n}",
                    tuple.len()
                )));
            }
            if !v.is_finite() {
                return Err(HedgeError::BadPayoff(format!("non-finite entry at {tuple:?}")));
            }
        }
        // Every leaf tuple must be priced.
        let total: usize = marginals.iter().map(|m| m.leaf_count()).product();
        if self.entries.len() != total {
            return Err(HedgeError::BadPayoff(format!(
                "{} entries for {total} leaf tuples",
                self.entries.len()
            )));
        }
        if let Some(bounds) = &self.bounds {
            if bounds.len() != n {
                return Err(HedgeError::BadPayoff("bound witness count mismatch".into()));
            }
            for (i, b) in bounds.iter().enumerate() {
                if b.len() != marginals[i].leaf_count() {
                    return Err(HedgeError::BadPayoff(format!(
                        "bound witness {i} has wrong length"
                    )));
                }
            }
            for (tuple, &v) in &self.entries {
                let cap: f64 = tuple.iter().enumerate().map(|(i, &l)| bounds[i][l]).sum();
                if v > cap + DERIVED_TOL {
                    return Err(HedgeError::BadPayoff(format!(
                        "payoff {v} exceeds bound witness sum {cap} at {tuple:?}"
                    )));
                }
            }
        }
        Ok(())
    }

    fn negated(&self) -> CostFunction {
        CostFunction::Table(self.entries.iter().map(|(k, v)| (k.clone(), -v)).collect())
    }
}

/// Self-financing strategy: initial capital and, per time `t` in
/// `0..T−1`, per joint prefix tuple at depth `t` (empty at 0), one
/// holding per marginal asset (flattened over value dimensions).
#[derive(Debug, Clone)]
pub struct Strategy {
    pub p0: f64,
    pub deltas: Vec<BTreeMap<Vec<usize>, Vec<f64>>>,
}

/// No-arbitrage check report: both characterizations and their
/// agreement.
#[derive(Debug, Clone)]
pub struct NaReport {
    pub ok: bool,
    pub joint_martingale_ok: bool,
    pub multicausal_ok: bool,
    pub flags_agree: bool,
    pub worst_violation: f64,
    pub witness: Option<String>,
}

/// Superhedge verification report.
#[derive(Debug, Clone)]
pub struct HedgeReport {
    pub domination_ok: bool,
    pub worst_domination_violation: f64,
    pub equality_ok: Option<bool>,
    pub worst_equality_violation: Option<f64>,
    pub price_matches_model: Option<bool>,
    pub witness: Option<String>,
}

/// Time-0 value convention: `x_0 = E[X_1]` componentwise.
fn initial_value(m: &FilteredProcess) -> Vec<f64> {
    let mut v = alloc::vec![0.0; m.dimension()];
    for (node, p) in m.initial_law() {
        for (k, x) in m.node(node).value.iter().enumerate() {
            v[k] += p * x;
        }
    }
    v
}

/// Verify that the coupling admits no arbitrage: the joint process is a
/// martingale in its joint filtration, equivalently the coupling is
/// multicausal (given martingale marginals).
pub fn check_na(pi: &Coupling) -> Result<NaReport, HedgeError> {
    for (i, m) in pi.marginals.iter().enumerate() {
        let r = m.is_martingale();
        if !r.ok {
            return Err(HedgeError::NotMartingaleMarginal(format!(
                "marginal {i}: violation {}",
                r.worst_violation
            )));
        }
    }
    let horizon = pi.marginals[0].horizon();
    let mut worst = 0.0;
    let mut witness = None;
    for t in 1..horizon {
        // conditional one-step laws given the joint depth-t prefix
        let cond = pi.disintegrate(t + 1);
        for (prefix, dist) in cond {
            for (i, m) in pi.marginals.iter().enumerate() {
                for k in 0..m.dimension() {
                    let mut mean = 0.0;
                    for (cur, p) in &dist {
                        mean += p * m.node(cur[i]).value[k];
                    }
                    let dev = fabs(mean - m.node(prefix[i]).value[k]);
                    if dev > worst {
                        worst = dev;
                        witness = Some(format!(
                            "t={t}, prefix {prefix:?}, asset {i}, coordinate {k}: \
                             conditional mean off by {dev}"
                        ));
                    }
                }
            }
        }
    }
    let joint_ok = worst <= DERIVED_TOL;
    let mc = pi.check(Mode::Multicausal);
    Ok(NaReport {
        ok: joint_ok && mc.ok,
        joint_martingale_ok: joint_ok,
        multicausal_ok: mc.ok,
        flags_agree: joint_ok == mc.ok,
        worst_violation: fmax(worst, mc.worst_violation),
        witness: witness.or(mc.witness),
    })
}

pub struct SuperhedgeResult {
    pub price: f64,
    pub worst_case_model: Coupling,
    /// The minimization run for cost `−ξ` (its dual prices the hedge).
    pub solution: AdaptedSolution,
}

/// Robust superhedging price: the maximal expectation of `ξ` over
/// multicausal couplings of the martingale marginals.
pub fn superhedge_price(
    marginals: &[&FilteredProcess],
    xi: &Payoff,
) -> Result<SuperhedgeResult, HedgeError> {
    for (i, m) in marginals.iter().enumerate() {
        let r = m.is_martingale();
        if !r.ok {
            return Err(HedgeError::NotMartingaleMarginal(format!(
                "marginal {i}: violation {}",
                r.worst_violation
            )));
        }
    }
    xi.validate(marginals)?;
    let sol = solve_adapted_lp(marginals, &xi.negated(), Mode::Multicausal)?;
    Ok(SuperhedgeResult {
        price: -sol.value,
        worst_case_model: sol.coupling.clone(),
        solution: sol,
    })
}

/// Solve `Δ · (child − parent values) = target` per conditioning node,
/// least squares over the value dimensions; gate on the residual.
fn solve_node_increments(
    increments: &[Vec<f64>],
    targets: &[f64],
    context: &str,
) -> Result<Vec<f64>, HedgeError> {
    let d = increments[0].len();
    let k = increments.len();
    // normal equations (D^T D) Δ = D^T m
    let mut a = alloc::vec![alloc::vec![0.0; d + 1]; d];
    for r in 0..d {
        for c in 0..d {
            for row in 0..k {
                a[r][c] += increments[row][r] * increments[row][c];
            }
        }
        for row in 0..k {
            a[r][d] += increments[row][r] * targets[row];
        }
    }
    // Gaussian elimination with partial pivoting; a singular direction
    // means the increments do not span it and the component is free
    // (set to zero).
    let mut delta = alloc::vec![0.0; d];
    let mut used = alloc::vec![false; d];
    for col in 0..d {
        let piv = (0..d)
            .filter(|&r| !used[r])
            .max_by(|&r1, &r2| fabs(a[r1][col]).partial_cmp(&fabs(a[r2][col])).unwrap());
        let Some(piv) = piv else { break };
        if fabs(a[piv][col]) < 1e-12 {
            continue;
        }
        used[piv] = true;
        let f = a[piv][col];
        for j in 0..=d {
            a[piv][j] /= f;
        }
        for r in 0..d {
            if r != piv {
                let f = a[r][col];
                if f != 0.0 {
                    for j in 0..=d {
                        a[r][j] -= f * a[piv][j];
                    }
                }
            }
        }
        delta[col] = 0.0; // assigned below from the reduced system
    }
    // back-substitute: after full elimination each used row is unit in
    // its column
    for col in 0..d {
        for r in 0..d {
            if used[r] && fabs(a[r][col] - 1.0) < 1e-9
                && (0..d).all(|j| j == col || fabs(a[r][j]) < 1e-9)
            {
                delta[col] = a[r][d];
            }
        }
    }
    let mut residual = 0.0;
    for row in 0..k {
        let fit: f64 = (0..d).map(|j| increments[row][j] * delta[j]).sum();
        residual = fmax(residual, fabs(fit - targets[row]));
    }
    if residual > DUAL_TOL {
        return Err(HedgeError::IncompleteMarket(format!(
            "{context}: representation residual {residual}"
        )));
    }
    Ok(delta)
}

/// Convert a verified multicausal dual for cost `−ξ` into a trading
/// strategy: per marginal, the negated compensated increments are
/// represented as holdings times value increments at each node.
pub fn extract_strategy(
    marginals: &[&FilteredProcess],
    xi: &Payoff,
    dual: &DualPotential,
) -> Result<Strategy, HedgeError> {
    let _ = xi;
    let n = marginals.len();
    let horizon = marginals[0].horizon();
    if dual.mode != Mode::Multicausal {
        return Err(HedgeError::BadPayoff("dual must be multicausal".into()));
    }
    let p0 = -dual.value(marginals);
    let mut deltas: Vec<BTreeMap<Vec<usize>, Vec<f64>>> =
        alloc::vec![BTreeMap::new(); horizon];

    // t = 0: the increment m^i_1 = ∫f^i_1 dμ^i − f^i_1 over the roots,
    // against x^i_0 = E[X^i_1].
    for i in 0..n {
        let m = marginals[i];
        let x0 = initial_value(m);
        let mean: f64 = m
            .initial_law()
            .iter()
            .map(|&(node, p)| p * dual.initial[i].get(&node).copied().unwrap_or(0.0))
            .sum();
        let incs: Vec<Vec<f64>> = m
            .level(1)
            .iter()
            .map(|&r| {
                m.node(r).value.iter().zip(x0.iter()).map(|(v, x)| v - x).collect()
            })
            .collect();
        let targets: Vec<f64> = m
            .level(1)
            .iter()
            .map(|&r| mean - dual.initial[i].get(&r).copied().unwrap_or(0.0))
            .collect();
        let delta = solve_node_increments(&incs, &targets, &format!("marginal {i}, t=0"))?;
        // holdings concatenated in marginal order
        deltas[0].entry(Vec::new()).or_default().extend(delta);
    }

    // t ≥ 1: per joint prefix tuple at depth t, represent the negated
    // compensator of each marginal over the next step.
    for t in 1..horizon {
        let all: Vec<usize> = (0..n).collect();
        for prefix in node_tuples(marginals, &all, t) {
            let mut holdings = Vec::new();
            for i in 0..n {
                let m = marginals[i];
                let parent = prefix[i];
                let others: Vec<usize> = (0..n).filter(|&j| j != i).map(|j| prefix[j]).collect();
                let children = m.children(parent);
                let incs: Vec<Vec<f64>> = children
                    .iter()
                    .map(|&c| {
                        m.node(c)
                            .value
                            .iter()
                            .zip(m.node(parent).value.iter())
                            .map(|(v, x)| v - x)
                            .collect()
                    })
                    .collect();
                let targets: Vec<f64> = children
                    .iter()
                    .map(|&c| {
                        let key = CompensatorKey {
                            marginal: i,
                            t: t + 1,
                            own_node: c,
                            others: others.clone(),
                        };
                        -dual.compensators.get(&key).copied().unwrap_or(0.0)
                    })
                    .collect();
                let delta = solve_node_increments(
                    &incs,
                    &targets,
                    &format!("marginal {i}, t={t}, node '{}'", m.node(parent).id),
                )?;
                holdings.extend(delta);
            }
            deltas[t].insert(prefix, holdings);
        }
    }

    Ok(Strategy { p0, deltas })
}

/// Terminal wealth of a strategy on a leaf tuple.
pub fn terminal_wealth(
    marginals: &[&FilteredProcess],
    strategy: &Strategy,
    tuple: &[usize],
) -> f64 {
    let n = marginals.len();
    let horizon = marginals[0].horizon();
    let mut wealth = strategy.p0;
    for t in 0..horizon {
        let prefix: Vec<usize> = if t == 0 {
            Vec::new()
        } else {
            (0..n).map(|i| marginals[i].prefix_node(tuple[i], t)).collect()
        };
        let Some(holdings) = strategy.deltas[t].get(&prefix) else { continue };
        let mut offset = 0;
        for i in 0..n {
            let m = marginals[i];
            let d = m.dimension();
            let cur = m.node(m.prefix_node(tuple[i], t + 1)).value.clone();
            let prev = if t == 0 {
                initial_value(m)
            } else {
                m.node(prefix[i]).value.clone()
            };
            for k in 0..d {
                wealth += holdings[offset + k] * (cur[k] - prev[k]);
            }
            offset += d;
        }
    }
    wealth
}

/// Check domination of the payoff everywhere on the product of the
/// marginal supports, and — when the worst-case model is supplied —
/// equality on its support together with price consistency.
pub fn verify_superhedge(
    marginals: &[&FilteredProcess],
    strategy: &Strategy,
    xi: &Payoff,
    pistar: Option<&Coupling>,
) -> HedgeReport {
    let mut worst = 0.0;
    let mut witness = None;
    let mut tuple = alloc::vec![0usize; marginals.len()];
    loop {
        let w = terminal_wealth(marginals, strategy, &tuple);
        let x = xi.entries.get(&tuple).copied().unwrap_or(0.0);
        let dev = x - w;
        if dev > worst {
            worst = dev;
            witness = Some(format!("tuple {tuple:?}: wealth {w} < payoff {x}"));
        }
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
    let domination_ok = worst <= DUAL_TOL;

    let mut equality_ok = None;
    let mut worst_eq = None;
    let mut price_matches = None;
    if let Some(pi) = pistar {
        let mut we = 0.0;
        let mut expect = 0.0;
        for (tuple, &p) in &pi.mass {
            let w = terminal_wealth(marginals, strategy, tuple);
            let x = xi.entries.get(tuple).copied().unwrap_or(0.0);
            we = fmax(we, fabs(w - x));
            expect += p * x;
        }
        equality_ok = Some(we <= DUAL_TOL);
        worst_eq = Some(we);
        price_matches = Some(fabs(strategy.p0 - expect) <= DUAL_TOL);
    }

    HedgeReport {
        domination_ok,
        worst_domination_violation: worst,
        equality_ok,
        worst_equality_violation: worst_eq,
        price_matches_model: price_matches,
        witness,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::process::process_from_paths;
    use crate::solver::extract_dual;

    /// Binomial martingale: root 1, steps ×(1±u) additive offsets.
    fn martingale_binomial() -> FilteredProcess {
        process_from_paths(
            1,
            2,
            &[
                (alloc::vec![alloc::vec![1.0], alloc::vec![2.0]], 0.5),
                (alloc::vec![alloc::vec![1.0], alloc::vec![0.0]], 0.5),
            ],
        )
        .unwrap()
    }

    fn one_step_pm() -> FilteredProcess {
        process_from_paths(
            1,
            1,
            &[(alloc::vec![alloc::vec![1.0]], 0.5), (alloc::vec![alloc::vec![-1.0]], 0.5)],
        )
        .unwrap()
    }

    fn full_payoff<F: Fn(&[usize]) -> f64>(
        marginals: &[&FilteredProcess],
        f: F,
    ) -> Payoff {
        let mut entries = BTreeMap::new();
        let mut tuple = alloc::vec![0usize; marginals.len()];
        loop {
            entries.insert(tuple.clone(), f(&tuple));
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
                return Payoff { entries, bounds: None };
            }
        }
    }

    #[test]
    fn product_of_martingales_has_na() {
        let a = martingale_binomial();
        let pi = Coupling::product(&[&a, &a]);
        let r = check_na(&pi).unwrap();
        assert!(r.ok);
        assert!(r.flags_agree);
    }

    #[test]
    fn cross_step_correlation_breaks_na() {
        // Asset 2 reveals ±1 at time 1 (then stays constant); couple it
        // with asset 1's *second* step. Conditionally on asset 2's
        // time-1 value, asset 1's second step is deterministic — joint
        // martingale fails, multicausality fails, and the flags agree.
        let a = martingale_binomial();
        let b = process_from_paths(
            1,
            2,
            &[
                (alloc::vec![alloc::vec![1.0], alloc::vec![1.0]], 0.5),
                (alloc::vec![alloc::vec![-1.0], alloc::vec![-1.0]], 0.5),
            ],
        )
        .unwrap();
        let a_up = (0..2).find(|&l| a.path_values(l)[1][0] > 1.0).unwrap();
        let b_up = (0..2).find(|&l| b.path_values(l)[0][0] > 0.0).unwrap();
        let mut mass = BTreeMap::new();
        mass.insert(alloc::vec![a_up, b_up], 0.5);
        mass.insert(alloc::vec![1 - a_up, 1 - b_up], 0.5);
        let pi = Coupling::new(alloc::vec![a.clone(), b.clone()], mass).unwrap();
        let r = check_na(&pi).unwrap();
        assert!(!r.ok);
        assert!(!r.joint_martingale_ok);
        assert!(!r.multicausal_ok);
        assert!(r.flags_agree);
    }

    #[test]
    fn one_step_coupling_always_na() {
        let a = one_step_pm();
        let mut mass = BTreeMap::new();
        mass.insert(alloc::vec![0usize, 1usize], 0.5);
        mass.insert(alloc::vec![1usize, 0usize], 0.5);
        let pi = Coupling::new(alloc::vec![a.clone(), a.clone()], mass).unwrap();
        let r = check_na(&pi).unwrap();
        assert!(r.ok, "{r:?}");
    }

    #[test]
    fn constant_payoff_prices_at_constant() {
        let a = martingale_binomial();
        let xi = full_payoff(&[&a, &a], |_| 3.25);
        let res = superhedge_price(&[&a, &a], &xi).unwrap();
        assert!((res.price - 3.25).abs() < 1e-9);
    }

    #[test]
    fn terminal_match_indicator_priced_by_comonotone_model() {
        let a = one_step_pm();
        let xi = full_payoff(&[&a, &a], |t| if t[0] == t[1] { 1.0 } else { 0.0 });
        let res = superhedge_price(&[&a, &a], &xi).unwrap();
        assert!((res.price - 1.0).abs() < 1e-9, "price {}", res.price);
    }

    #[test]
    fn separable_payoff_prices_at_sum_of_means() {
        let a = martingale_binomial();
        // f1(x) = x_2^2, f2(y) = 2 y_2
        let f = |m: &FilteredProcess, l: usize| {
            let v = m.path_values(l)[1][0];
            (v * v, 2.0 * v)
        };
        let xi = full_payoff(&[&a, &a], |t| f(&a, t[0]).0 + f(&a, t[1]).1);
        let res = superhedge_price(&[&a, &a], &xi).unwrap();
        let mean: f64 = (0..2).map(|l| 0.5 * (f(&a, l).0 + f(&a, l).1)).sum();
        assert!((res.price - mean).abs() < 1e-9);
    }

    #[test]
    fn strategy_replicates_and_dominates() {
        let a = martingale_binomial();
        let xi = full_payoff(&[&a, &a], |t| {
            let x = a.path_values(t[0])[1][0];
            let y = a.path_values(t[1])[1][0];
            (x - y).abs()
        });
        let res = superhedge_price(&[&a, &a], &xi).unwrap();
        let dual = extract_dual(&[&a, &a], &xi.negated(), &res.solution).unwrap();
        let strat = extract_strategy(&[&a, &a], &xi, &dual).unwrap();
        assert!((strat.p0 - res.price).abs() < 1e-7);
        let rep = verify_superhedge(&[&a, &a], &strat, &xi, Some(&res.worst_case_model));
        assert!(rep.domination_ok, "{rep:?}");
        assert_eq!(rep.equality_ok, Some(true));
        assert_eq!(rep.price_matches_model, Some(true));
    }

    #[test]
    fn zero_strategy_with_max_payoff_dominates_but_no_equality() {
        let a = martingale_binomial();
        let xi = full_payoff(&[&a, &a], |t| {
            let x = a.path_values(t[0])[1][0];
            let y = a.path_values(t[1])[1][0];
            x + y
        });
        let maxv = xi.entries.values().cloned().fold(f64::NEG_INFINITY, f64::max);
        let horizon = a.horizon();
        let strat = Strategy { p0: maxv, deltas: alloc::vec![BTreeMap::new(); horizon] };
        let res = superhedge_price(&[&a, &a], &xi).unwrap();
        let rep = verify_superhedge(&[&a, &a], &strat, &xi, Some(&res.worst_case_model));
        assert!(rep.domination_ok);
        assert_eq!(rep.equality_ok, Some(false));
    }

    #[test]
    fn perturbed_strategy_breaks_domination() {
        let a = martingale_binomial();
        let xi = full_payoff(&[&a, &a], |t| {
            let x = a.path_values(t[0])[1][0];
            let y = a.path_values(t[1])[1][0];
            (x - y).abs()
        });
        let res = superhedge_price(&[&a, &a], &xi).unwrap();
        let dual = extract_dual(&[&a, &a], &xi.negated(), &res.solution).unwrap();
        let mut strat = extract_strategy(&[&a, &a], &xi, &dual).unwrap();
        // lower the initial capital slightly: some tuple must break
        strat.p0 -= 0.1;
        let rep = verify_superhedge(&[&a, &a], &strat, &xi, None);
        assert!(!rep.domination_ok);
        assert!(rep.witness.is_some());
    }

    #[test]
    fn trinomial_node_incomplete() {
        let tri = process_from_paths(
            1,
            1,
            &[
                (alloc::vec![alloc::vec![2.0]], 0.25),
                (alloc::vec![alloc::vec![0.0]], 0.5),
                (alloc::vec![alloc::vec![-2.0]], 0.25),
            ],
        )
        .unwrap();
        let a = one_step_pm();
        // payoff requiring a nonlinear-in-value increment at the root
        let xi = full_payoff(&[&tri, &a], |t| {
            let v = tri.path_values(t[0])[0][0];
            if v.abs() > 1.0 { 1.0 } else { 0.0 }
        });
        let res = superhedge_price(&[&tri, &a], &xi).unwrap();
        let dual = extract_dual(&[&tri, &a], &xi.negated(), &res.solution).unwrap();
        let r = extract_strategy(&[&tri, &a], &xi, &dual);
        assert!(matches!(r, Err(HedgeError::IncompleteMarket(_))), "{r:?}");
    }

    #[test]
    fn bound_witness_validation() {
        let a = one_step_pm();
        let mut xi = full_payoff(&[&a, &a], |_| 1.0);
        xi.bounds = Some(alloc::vec![alloc::vec![0.5, 0.5], alloc::vec![0.5, 0.5]]);
        assert!(xi.validate(&[&a, &a]).is_ok());
        xi.bounds = Some(alloc::vec![alloc::vec![0.2, 0.2], alloc::vec![0.2, 0.2]]);
        assert!(matches!(xi.validate(&[&a, &a]), Err(HedgeError::BadPayoff(_))));
    }

    #[test]
    fn non_martingale_marginal_rejected() {
        let skew = process_from_paths(
            1,
            2,
            &[
                (alloc::vec![alloc::vec![1.0], alloc::vec![2.0]], 0.9),
                (alloc::vec![alloc::vec![1.0], alloc::vec![0.0]], 0.1),
            ],
        )
        .unwrap();
        let xi = full_payoff(&[&skew, &skew], |_| 0.0);
        assert!(matches!(
            superhedge_price(&[&skew, &skew], &xi),
            Err(HedgeError::NotMartingaleMarginal(_))
        ));
    }
}
