//! Cost functions over tuples of leaf paths.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec::Vec;

use crate::error::CostError;
use crate::math::fabs;
use crate::process::FilteredProcess;
use crate::INPUT_TOL;

/// Cost `c(x^1, ..., x^N)` evaluated on tuples of leaf paths.
///
/// `Table` is keyed by leaf-index tuples (one index per marginal, in
/// marginal order). The built-ins evaluate on path values and therefore
/// also apply to raw value sequences (used by the barycenter module for
/// candidate paths).
#[derive(Debug, Clone, PartialEq)]
pub enum CostFunction {
    Table(BTreeMap<Vec<usize>, f64>),
    /// `Σ_t Σ_{i<j} ‖x^i_t − x^j_t‖_p^p` with `p ∈ {1, 2}`; the plain
    /// `Σ_t ‖x_t − y_t‖_p^p` for two marginals.
    LpSum { p: u8 },
    /// `1` when all terminal values coincide, else `0`.
    TerminalIndicator,
}

impl CostFunction {
    /// Evaluate on raw path value sequences, with `key` available for
    /// table lookups (leaf-index tuple in marginal order).
    pub fn eval_keyed(&self, key: &[usize], seqs: &[Vec<&[f64]>]) -> Result<f64, CostError> {
        match self {
            CostFunction::Table(table) => {
                let v = *table.get(key).ok_or_else(|| {
                    CostError::MissingCostEntry(format!("tuple {key:?}"))
                })?;
                if !v.is_finite() {
                    return Err(CostError::NonFiniteEntry(format!("tuple {key:?}")));
                }
                Ok(v)
            }
            CostFunction::LpSum { p } => {
                if !matches!(p, 1 | 2) {
                    return Err(CostError::NonFiniteEntry(format!("unsupported exponent {p}")));
                }
                let mut acc = 0.0;
                for i in 0..seqs.len() {
                    for j in i + 1..seqs.len() {
                        for (a, b) in seqs[i].iter().zip(seqs[j].iter()) {
                            for (x, y) in a.iter().zip(b.iter()) {
                                let d = fabs(x - y);
                                acc += if *p == 1 { d } else { d * d };
                            }
                        }
                    }
                }
                Ok(acc)
            }
            CostFunction::TerminalIndicator => {
                let last: Vec<&[f64]> = seqs.iter().map(|s| *s.last().unwrap()).collect();
                let all_equal = last.windows(2).all(|w| {
                    w[0].iter().zip(w[1].iter()).all(|(x, y)| fabs(x - y) <= INPUT_TOL)
                });
                Ok(if all_equal { 1.0 } else { 0.0 })
            }
        }
    }

    /// Evaluate on a tuple of leaf indices of the given marginals.
    pub fn eval(
        &self,
        marginals: &[&FilteredProcess],
        tuple: &[usize],
    ) -> Result<f64, CostError> {
        match self {
            // Skip path assembly when only the key matters.
            CostFunction::Table(_) => self.eval_keyed(tuple, &[]),
            _ => {
                let seqs: Vec<Vec<&[f64]>> = marginals
                    .iter()
                    .zip(tuple.iter())
                    .map(|(m, &l)| m.path_values(l))
                    .collect();
                self.eval_keyed(tuple, &seqs)
            }
        }
    }

    /// Full table of this cost over all leaf tuples of the marginals.
    pub fn tabulate(
        &self,
        marginals: &[&FilteredProcess],
    ) -> Result<BTreeMap<Vec<usize>, f64>, CostError> {
        let mut out = BTreeMap::new();
        let mut tuple = alloc::vec![0usize; marginals.len()];
        loop {
            out.insert(tuple.clone(), self.eval(marginals, &tuple)?);
            // odometer increment over leaf counts
            let mut k = marginals.len();
            loop {
                if k == 0 {
                    return Ok(out);
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
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::process::process_from_paths;

    #[test]
    fn lpsum_two_marginals() {
        let x = process_from_paths(1, 2, &[(vec![vec![1.0], vec![3.0]], 1.0)]).unwrap();
        let y = process_from_paths(1, 2, &[(vec![vec![0.0], vec![1.0]], 1.0)]).unwrap();
        let c1 = CostFunction::LpSum { p: 1 };
        let c2 = CostFunction::LpSum { p: 2 };
        assert_eq!(c1.eval(&[&x, &y], &[0, 0]).unwrap(), 3.0);
        assert_eq!(c2.eval(&[&x, &y], &[0, 0]).unwrap(), 5.0);
    }

    #[test]
    fn lpsum_three_marginals_pairwise() {
        let procs: Vec<_> = [0.0, 1.0, 3.0]
            .iter()
            .map(|&v| process_from_paths(1, 1, &[(vec![vec![v]], 1.0)]).unwrap())
            .collect();
        let refs: Vec<&FilteredProcess> = procs.iter().collect();
        let c = CostFunction::LpSum { p: 1 };
        // |0-1| + |0-3| + |1-3| = 6
        assert_eq!(c.eval(&refs, &[0, 0, 0]).unwrap(), 6.0);
    }

    #[test]
    fn terminal_indicator() {
        let x = process_from_paths(
            1,
            2,
            &[
                (vec![vec![0.0], vec![1.0]], 0.5),
                (vec![vec![0.0], vec![-1.0]], 0.5),
            ],
        )
        .unwrap();
        let c = CostFunction::TerminalIndicator;
        assert_eq!(c.eval(&[&x, &x], &[0, 0]).unwrap(), 1.0);
        assert_eq!(c.eval(&[&x, &x], &[0, 1]).unwrap(), 0.0);
    }

    #[test]
    fn table_lookup_and_missing() {
        let mut t = BTreeMap::new();
        t.insert(vec![0, 1], 7.0);
        let c = CostFunction::Table(t);
        assert_eq!(c.eval_keyed(&[0, 1], &[]).unwrap(), 7.0);
        assert!(matches!(
            c.eval_keyed(&[1, 0], &[]),
            Err(CostError::MissingCostEntry(_))
        ));
    }
}
