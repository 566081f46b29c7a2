//! Dense two-phase primal simplex with dual multiplier recovery.
//!
//! Standard-form problems only: minimize `c·x` subject to `A x = b`,
//! `x ≥ 0`. Instances at desk scale (one-step transport kernels, leaf-
//! tuple couplings), so a dense tableau with a deterministic pivot rule
//! is preferred over speed: Dantzig's rule, falling back to Bland's rule
//! once degenerate pivots accumulate, guarantees both termination and
//! reproducibility.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::LpError;
use crate::math::{fabs, fmax};

#[derive(Debug, Clone)]
pub struct LinearProgram {
    /// Objective coefficients (minimization).
    pub objective: Vec<f64>,
    /// Equality constraint rows.
    pub rows: Vec<Vec<f64>>,
    /// Right-hand side, one entry per row.
    pub rhs: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub status: LpStatus,
    pub primal: Vec<f64>,
    /// One multiplier per constraint row (undefined unless optimal).
    pub duals: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    /// max |A x − b|
    pub primal_residual: f64,
    /// max_j (y·A_j − c_j)_+  (dual feasibility violation)
    pub dual_residual: f64,
    /// max_j |x_j · (c_j − y·A_j)|
    pub complementarity: f64,
}

const PIVOT_TOL: f64 = 1e-9;

struct Tableau {
    /// `m x (n + m + 1)` rows: structural columns, artificial columns, rhs.
    rows: Vec<Vec<f64>>,
    /// Reduced-cost row; last entry holds −(objective value).
    cost: Vec<f64>,
    basis: Vec<usize>,
    n: usize,
    m: usize,
    iterations: usize,
    degenerate: usize,
}

impl Tableau {
    fn ncols(&self) -> usize {
        self.n + self.m
    }

    fn pivot(&mut self, row: usize, col: usize) {
        let ncols = self.ncols();
        let piv = self.rows[row][col];
        for v in self.rows[row].iter_mut() {
            *v /= piv;
        }
        for i in 0..self.m {
            if i == row {
                continue;
            }
            let f = self.rows[i][col];
            if f != 0.0 {
                for j in 0..=ncols {
                    self.rows[i][j] -= f * self.rows[row][j];
                }
            }
        }
        let f = self.cost[col];
        if f != 0.0 {
            for j in 0..=ncols {
                self.cost[j] -= f * self.rows[row][j];
            }
        }
        self.basis[row] = col;
    }

    /// Run simplex on the current cost row; columns in `allow` may enter.
    fn run<F: Fn(usize) -> bool>(&mut self, allow: F, max_iter: usize) -> Result<LpStatus, LpError> {
        let ncols = self.ncols();
        let bland_after = 5 * (self.m + self.n);
        loop {
            // Entering column: Dantzig (most negative reduced cost),
            // Bland (first negative) once degeneracy has piled up.
            let bland = self.degenerate > bland_after;
            let mut enter = None;
            let mut best = -PIVOT_TOL;
            for j in 0..ncols {
                if !allow(j) {
                    continue;
                }
                let r = self.cost[j];
                if r < best {
                    enter = Some(j);
                    if bland {
                        break;
                    }
                    best = r;
                }
            }
            let Some(col) = enter else {
                return Ok(LpStatus::Optimal);
            };
            // Ratio test. Ties go to the largest pivot element to keep
            // the tableau well conditioned; under Bland's rule ties go
            // to the smallest basis index so termination is guaranteed.
            // Pivots barely above the zero tolerance amplify roundoff
            // by orders of magnitude, so rows with a comfortable pivot
            // are preferred whenever one attains the minimum ratio.
            let mut leave: Option<usize> = None;
            let mut best_ratio = f64::INFINITY;
            for threshold in [1e-7, PIVOT_TOL] {
                for i in 0..self.m {
                    let a = self.rows[i][col];
                    if a > threshold {
                        let ratio = self.rows[i][ncols] / a;
                        let better = match leave {
                            None => true,
                            Some(r) => {
                                ratio < best_ratio - 1e-12
                                    || (fabs(ratio - best_ratio) <= 1e-12
                                        && if bland {
                                            self.basis[i] < self.basis[r]
                                        } else {
                                            a > self.rows[r][col]
                                        })
                            }
                        };
                        if better {
                            leave = Some(i);
                            best_ratio = ratio;
                        }
                    }
                }
                if leave.is_some() {
                    break;
                }
            }
            let Some(row) = leave else {
                return Ok(LpStatus::Unbounded);
            };
            if best_ratio <= 1e-12 {
                self.degenerate += 1;
            } else {
                self.degenerate = 0;
            }
            self.pivot(row, col);
            self.iterations += 1;
            if self.iterations > max_iter {
                return Err(LpError::NumericalFailure(format!(
                    "iteration cap {max_iter} exceeded"
                )));
            }
        }
    }
}

pub fn solve_lp(lp: &LinearProgram) -> Result<LpSolution, LpError> {
    let m = lp.rows.len();
    let n = lp.objective.len();
    if lp.rhs.len() != m {
        return Err(LpError::BadProblem(format!(
            "{m} rows but {} rhs entries",
            lp.rhs.len()
        )));
    }
    for (i, row) in lp.rows.iter().enumerate() {
        if row.len() != n {
            return Err(LpError::BadProblem(format!(
                "row {i} has {} entries, expected {n}",
                row.len()
            )));
        }
    }
    let finite = lp.objective.iter().all(|v| v.is_finite())
        && lp.rhs.iter().all(|v| v.is_finite())
        && lp.rows.iter().all(|r| r.iter().all(|v| v.is_finite()));
    if !finite {
        return Err(LpError::BadProblem("non-finite problem data".into()));
    }
    if m == 0 {
        // No constraints: optimum is 0 at the origin unless some cost is
        // negative, in which case the problem is unbounded.
        let unbounded = lp.objective.iter().any(|&c| c < -PIVOT_TOL);
        return Ok(LpSolution {
            status: if unbounded { LpStatus::Unbounded } else { LpStatus::Optimal },
            primal: vec![0.0; n],
            duals: Vec::new(),
            value: 0.0,
            iterations: 0,
            primal_residual: 0.0,
            dual_residual: 0.0,
            complementarity: 0.0,
        });
    }

    // Sign-flip rows to make the rhs nonnegative; remember which, to
    // un-flip the recovered duals.
    let mut flipped = vec![false; m];
    let mut rows = Vec::with_capacity(m);
    for i in 0..m {
        let mut row = Vec::with_capacity(n + m + 1);
        let s = if lp.rhs[i] < 0.0 {
            flipped[i] = true;
            -1.0
        } else {
            1.0
        };
        for j in 0..n {
            row.push(s * lp.rows[i][j]);
        }
        for k in 0..m {
            row.push(if k == i { 1.0 } else { 0.0 });
        }
        row.push(s * lp.rhs[i]);
        rows.push(row);
    }

    // Phase 1: minimize the sum of artificials (basic at start, cost 1
    // each), so reduced costs of structural columns start at −Σ_i a_ij.
    let mut cost = vec![0.0; n + m + 1];
    for j in 0..n {
        let mut s = 0.0;
        for row in &rows {
            s += row[j];
        }
        cost[j] = -s;
    }
    let mut s = 0.0;
    for row in &rows {
        s += row[n + m];
    }
    cost[n + m] = -s;

    let mut tab = Tableau {
        rows,
        cost,
        basis: (n..n + m).collect(),
        n,
        m,
        iterations: 0,
        degenerate: 0,
    };
    let max_iter = 200 * (m + n) + 20_000;

    let st = tab.run(|j| j < n, max_iter)?;
    debug_assert_ne!(st, LpStatus::Unbounded, "phase-1 objective is bounded below");
    let phase1 = -tab.cost[n + m];
    if phase1 > 1e-9 {
        return Ok(LpSolution {
            status: LpStatus::Infeasible,
            primal: vec![0.0; n],
            duals: vec![0.0; m],
            value: 0.0,
            iterations: tab.iterations,
            primal_residual: 0.0,
            dual_residual: 0.0,
            complementarity: 0.0,
        });
    }
    // Drive remaining basic artificials out with zero-ratio pivots where
    // possible; rows with no structural pivot are redundant and keep the
    // artificial basic at level zero.
    for i in 0..m {
        if tab.basis[i] >= n {
            // the largest structural element keeps the pivot well
            // conditioned; rows with none are redundant and keep their
            // artificial basic at level zero
            let col = (0..n)
                .filter(|&j| fabs(tab.rows[i][j]) > 1e-7)
                .max_by(|&a, &b| {
                    fabs(tab.rows[i][a]).partial_cmp(&fabs(tab.rows[i][b])).unwrap()
                });
            if let Some(col) = col {
                tab.pivot(i, col);
            }
        }
    }
    #[cfg(debug_assertions)]
    {
        let mut seen = vec![false; n + m];
        for &b in &tab.basis {
            assert!(!seen[b], "duplicate basis column {b}");
            seen[b] = true;
        }
    }

    // Phase 2: true objective. Artificial columns stay in the tableau
    // (the cost row over them recovers the duals) but are barred from
    // entering; rebuild reduced costs from the current basis.
    let ncols = n + m;
    for j in 0..=ncols {
        tab.cost[j] = if j < n { lp.objective[j] } else { 0.0 };
    }
    for i in 0..m {
        let cb = if tab.basis[i] < n { lp.objective[tab.basis[i]] } else { 0.0 };
        if cb != 0.0 {
            for j in 0..=ncols {
                tab.cost[j] -= cb * tab.rows[i][j];
            }
        }
    }
    // A basic artificial stuck at zero must never leave zero: forbid
    // pivots that would lift it by barring its row from the ratio test
    // is unnecessary — it can only increase via an entering column with
    // positive coefficient in its row, and then the zero ratio makes it
    // leave first.
    let st = tab.run(|j| j < n, max_iter)?;
    if st == LpStatus::Unbounded {
        return Ok(LpSolution {
            status: LpStatus::Unbounded,
            primal: vec![0.0; n],
            duals: vec![0.0; m],
            value: 0.0,
            iterations: tab.iterations,
            primal_residual: 0.0,
            dual_residual: 0.0,
            complementarity: 0.0,
        });
    }

    let mut primal = vec![0.0; n];
    for i in 0..m {
        if tab.basis[i] < n {
            primal[tab.basis[i]] = tab.rows[i][ncols];
        }
    }
    // Guard against silent tableau degradation: the cost row must agree
    // with reduced costs recomputed from the recovered multipliers and
    // the original data.
    let mut drift = 0.0;
    for j in 0..n {
        let y_a: f64 = (0..m)
            .map(|i| {
                -tab.cost[n + i] * if flipped[i] { -lp.rows[i][j] } else { lp.rows[i][j] }
            })
            .sum();
        drift = fmax(drift, fabs(lp.objective[j] - y_a - tab.cost[j]));
    }
    if drift > 1e-6 {
        return Err(LpError::NumericalFailure(format!(
            "tableau degraded: reduced-cost drift {drift:e}"
        )));
    }
    // y_i = −(reduced cost of artificial i), un-flipping flipped rows.
    let mut duals = vec![0.0; m];
    for i in 0..m {
        let y = -tab.cost[n + i];
        duals[i] = if flipped[i] { -y } else { y };
    }
    let value: f64 = (0..n).map(|j| lp.objective[j] * primal[j]).sum();

    let mut primal_residual = 0.0;
    for i in 0..m {
        let ax: f64 = (0..n).map(|j| lp.rows[i][j] * primal[j]).sum();
        primal_residual = fmax(primal_residual, fabs(ax - lp.rhs[i]));
    }
    let mut dual_residual = 0.0;
    let mut complementarity = 0.0;
    for j in 0..n {
        let ya: f64 = (0..m).map(|i| duals[i] * lp.rows[i][j]).sum();
        let slack = lp.objective[j] - ya;
        dual_residual = fmax(dual_residual, -slack);
        complementarity = fmax(complementarity, fabs(primal[j] * slack));
    }
    dual_residual = fmax(dual_residual, 0.0);

    Ok(LpSolution {
        status: LpStatus::Optimal,
        primal,
        duals,
        value,
        iterations: tab.iterations,
        primal_residual,
        dual_residual,
        complementarity,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn solve(obj: &[f64], rows: &[&[f64]], rhs: &[f64]) -> LpSolution {
        solve_lp(&LinearProgram {
            objective: obj.to_vec(),
            rows: rows.iter().map(|r| r.to_vec()).collect(),
            rhs: rhs.to_vec(),
        })
        .unwrap()
    }

    #[test]
    fn single_variable() {
        let s = solve(&[1.0], &[&[1.0]], &[1.0]);
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.value - 1.0).abs() < 1e-12);
        assert!((s.duals[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn dirac_transport() {
        // 1x1 transport polytope: x = 1, cost 3.
        let s = solve(&[3.0], &[&[1.0], &[1.0]], &[1.0, 1.0]);
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.value - 3.0).abs() < 1e-12);
        assert!(s.primal_residual < 1e-12);
        // duals sum to the cost on the active column
        assert!((s.duals[0] + s.duals[1] - 3.0).abs() < 1e-9);
    }

    #[test]
    fn infeasible_detected() {
        let s = solve(&[1.0, 1.0], &[&[1.0, 1.0], &[1.0, 1.0]], &[1.0, 2.0]);
        assert_eq!(s.status, LpStatus::Infeasible);
    }

    #[test]
    fn unbounded_detected() {
        // min −x1 s.t. x1 − x2 = 0: push both to infinity.
        let s = solve(&[-1.0, 0.0], &[&[1.0, -1.0]], &[0.0]);
        assert_eq!(s.status, LpStatus::Unbounded);
    }

    #[test]
    fn negative_rhs_row_handled() {
        // −x = −2  =>  x = 2
        let s = solve(&[1.0], &[&[-1.0]], &[-2.0]);
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.primal[0] - 2.0).abs() < 1e-12);
        // dual of the flipped row: value sensitivity d(value)/d(rhs) = -1
        assert!((s.duals[0] + 1.0).abs() < 1e-9);
    }

    #[test]
    fn redundant_rows_tolerated() {
        let s = solve(
            &[1.0, 2.0],
            &[&[1.0, 1.0], &[2.0, 2.0]],
            &[1.0, 2.0],
        );
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.value - 1.0).abs() < 1e-12);
        assert!(s.primal_residual < 1e-9);
        assert!(s.dual_residual < 1e-9);
    }

    /// Exhaustive vertex enumeration for small `A x = b, x ≥ 0`:
    /// every basis choice of m columns, solved by Gaussian elimination.
    fn vertex_optimum(obj: &[f64], rows: &[&[f64]], rhs: &[f64]) -> f64 {
        let m = rows.len();
        let n = obj.len();
        let mut best = f64::INFINITY;
        let mut cols = vec![0usize; m];
        fn rec(
            start: usize,
            k: usize,
            cols: &mut Vec<usize>,
            m: usize,
            n: usize,
            obj: &[f64],
            rows: &[&[f64]],
            rhs: &[f64],
            best: &mut f64,
        ) {
            if k == m {
                // solve the m x m system on the chosen columns
                let mut a: Vec<Vec<f64>> = (0..m)
                    .map(|i| {
                        let mut r: Vec<f64> =
                            cols.iter().map(|&j| rows[i][j]).collect();
                        r.push(rhs[i]);
                        r
                    })
                    .collect();
                for p in 0..m {
                    let piv = (p..m).max_by(|&x, &y| {
                        a[x][p].abs().partial_cmp(&a[y][p].abs()).unwrap()
                    });
                    let piv = piv.unwrap();
                    if a[piv][p].abs() < 1e-10 {
                        return;
                    }
                    a.swap(p, piv);
                    for i in 0..m {
                        if i != p {
                            let f = a[i][p] / a[p][p];
                            for j in p..=m {
                                a[i][j] -= f * a[p][j];
                            }
                        }
                    }
                }
                let x: Vec<f64> = (0..m).map(|i| a[i][m] / a[i][i]).collect();
                if x.iter().all(|&v| v >= -1e-9) {
                    let val: f64 =
                        cols.iter().zip(x.iter()).map(|(&j, &v)| obj[j] * v).sum();
                    if val < *best {
                        *best = val;
                    }
                }
                return;
            }
            for j in start..n {
                cols[k] = j;
                rec(j + 1, k + 1, cols, m, n, obj, rows, rhs, best);
            }
        }
        rec(0, 0, &mut cols, m, n, obj, rows, rhs, &mut best);
        best
    }

    #[test]
    fn random_systems_match_vertex_enumeration() {
        // xorshift-based reproducible pseudo-random 6x8 systems with a
        // built-in feasible point so phase 1 must succeed.
        let mut state = 0x9e3779b97f4a7c15u64;
        let mut next = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        for _ in 0..20 {
            let m = 4;
            let n = 6;
            let rows_v: Vec<Vec<f64>> =
                (0..m).map(|_| (0..n).map(|_| next() * 2.0 - 0.5).collect()).collect();
            let x0: Vec<f64> = (0..n).map(|_| next()).collect();
            let rhs: Vec<f64> = rows_v
                .iter()
                .map(|r| r.iter().zip(x0.iter()).map(|(a, x)| a * x).sum())
                .collect();
            let obj: Vec<f64> = (0..n).map(|_| next() * 2.0).collect();
            let rows: Vec<&[f64]> = rows_v.iter().map(|r| r.as_slice()).collect();
            let s = solve(&obj, &rows, &rhs);
            assert_eq!(s.status, LpStatus::Optimal);
            let oracle = vertex_optimum(&obj, &rows, &rhs);
            assert!(
                (s.value - oracle).abs() <= 1e-8 * (1.0 + oracle.abs()),
                "simplex {} vs vertex oracle {}",
                s.value,
                oracle
            );
            // strong duality: y·b equals the primal value
            let yb: f64 = s.duals.iter().zip(rhs.iter()).map(|(y, b)| y * b).sum();
            assert!((yb - s.value).abs() <= 1e-8 * (1.0 + s.value.abs()));
            assert!(s.primal_residual < 1e-9);
            assert!(s.dual_residual < 1e-8);
            assert!(s.complementarity < 1e-8);
        }
    }

    #[test]
    fn degenerate_problem_terminates() {
        // Heavily degenerate: many rhs zeros force zero-ratio pivots.
        let s = solve(
            &[1.0, 1.0, 1.0, -1.0],
            &[
                &[1.0, -1.0, 0.0, 0.0],
                &[0.0, 1.0, -1.0, 0.0],
                &[1.0, 0.0, 0.0, 1.0],
            ],
            &[0.0, 0.0, 1.0],
        );
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.value + 1.0).abs() < 1e-9);
    }
}
