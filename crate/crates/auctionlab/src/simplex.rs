//! Dense-tableau primal simplex.
//!
//! Solves `max c'x  s.t.  Ax = b, x >= 0` starting from a caller-supplied
//! feasible basis whose columns form the identity (the configuration LP
//! always has one: the two empty-bundle columns plus the item slacks).
//! Bland's rule guarantees termination under degeneracy. The problems here
//! are tiny, so no factorization or sparsity tricks are needed.

use crate::{Error, Result};

/// Pivot tolerance: entries below this count as zero.
pub const PIVOT_TOL: f64 = 1e-9;

/// Optimal basic solution of a standard-form LP.
#[derive(Clone, Debug)]
pub struct SimplexSolution {
    /// Primal values, one per column.
    pub x: Vec<f64>,
    pub objective: f64,
    /// Final reduced costs `c_j - y'A_j`, one per column. For a column that
    /// was the identity column of row `i` with zero cost, the dual of row
    /// `i` is the negated reduced cost.
    pub reduced_costs: Vec<f64>,
    /// Column indices of the final basis, one per row.
    pub basis: Vec<usize>,
    pub iterations: u64,
}

/// Maximize `c'x` over `Ax = b, x >= 0` from an initial basis whose columns
/// are the identity in row order and whose costs are zero.
pub fn solve(
    c: &[f64],
    a: &[Vec<f64>],
    b: &[f64],
    initial_basis: &[usize],
    max_iterations: u64,
) -> Result<SimplexSolution> {
    let rows = a.len();
    let cols = c.len();
    if b.len() != rows || initial_basis.len() != rows {
        return Err(Error::Parameter("dimension mismatch".into()));
    }
    for (i, row) in a.iter().enumerate() {
        if row.len() != cols {
            return Err(Error::Parameter(format!("row {i} has wrong length")));
        }
        if b[i] < -PIVOT_TOL {
            return Err(Error::Parameter(format!("negative right-hand side in row {i}")));
        }
    }
    for (i, &j) in initial_basis.iter().enumerate() {
        if c[j] != 0.0 {
            return Err(Error::Parameter("initial basic column must have zero cost".into()));
        }
        for (r, row) in a.iter().enumerate() {
            let expected = if r == i { 1.0 } else { 0.0 };
            if (row[j] - expected).abs() > PIVOT_TOL {
                return Err(Error::Parameter(format!(
                    "initial basis column {j} is not the identity column of row {i}"
                )));
            }
        }
    }

    // Tableau: rows x (cols + 1), last column the right-hand side; the cost
    // row holds reduced costs and, in its last entry, the negated objective.
    let mut t: Vec<Vec<f64>> = a
        .iter()
        .zip(b)
        .map(|(row, &bi)| {
            let mut r = row.clone();
            r.push(bi);
            r
        })
        .collect();
    let mut cost: Vec<f64> = c.to_vec();
    cost.push(0.0);
    let mut basis = initial_basis.to_vec();

    let mut iterations = 0u64;
    loop {
        // Bland: entering column = smallest index with positive reduced cost.
        let entering = (0..cols).find(|&j| cost[j] > PIVOT_TOL);
        let Some(e) = entering else { break };

        // Ratio test; ties go to the row whose basic variable has the
        // smallest column index (Bland again).
        let mut pivot_row: Option<usize> = None;
        let mut best_ratio = f64::INFINITY;
        for i in 0..rows {
            if t[i][e] > PIVOT_TOL {
                let ratio = t[i][cols] / t[i][e];
                let better = match pivot_row {
                    None => true,
                    Some(p) => {
                        ratio < best_ratio - PIVOT_TOL
                            || (ratio < best_ratio + PIVOT_TOL && basis[i] < basis[p])
                    }
                };
                if better {
                    best_ratio = ratio;
                    pivot_row = Some(i);
                }
            }
        }
        let Some(r) = pivot_row else {
            return Err(Error::Convergence(format!(
                "unbounded direction at column {e}"
            )));
        };

        // Pivot on (r, e).
        let piv = t[r][e];
        for v in t[r].iter_mut() {
            *v /= piv;
        }
        for i in 0..rows {
            if i != r && t[i][e].abs() > 0.0 {
                let factor = t[i][e];
                for j in 0..=cols {
                    t[i][j] -= factor * t[r][j];
                }
            }
        }
        let factor = cost[e];
        if factor.abs() > 0.0 {
            for j in 0..=cols {
                cost[j] -= factor * t[r][j];
            }
        }
        basis[r] = e;

        iterations += 1;
        if iterations > max_iterations {
            return Err(Error::Convergence(format!(
                "simplex exceeded {max_iterations} pivots"
            )));
        }
    }

    let mut x = vec![0.0; cols];
    for (i, &j) in basis.iter().enumerate() {
        x[j] = t[i][cols];
    }
    Ok(SimplexSolution {
        x,
        objective: -cost[cols],
        reduced_costs: cost[..cols].to_vec(),
        basis,
        iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// max 3x + 2y s.t. x + y <= 4, x <= 2 (slack columns 2, 3).
    #[test]
    fn small_inequality_lp() {
        let c = vec![3.0, 2.0, 0.0, 0.0];
        let a = vec![vec![1.0, 1.0, 1.0, 0.0], vec![1.0, 0.0, 0.0, 1.0]];
        let b = vec![4.0, 2.0];
        let sol = solve(&c, &a, &b, &[2, 3], 100).unwrap();
        assert!((sol.objective - 10.0).abs() < 1e-9);
        assert!((sol.x[0] - 2.0).abs() < 1e-9);
        assert!((sol.x[1] - 2.0).abs() < 1e-9);
        // Duals from the slack reduced costs: y = (2, 1).
        assert!((sol.reduced_costs[2] + 2.0).abs() < 1e-9);
        assert!((sol.reduced_costs[3] + 1.0).abs() < 1e-9);
    }

    /// Equality row with a zero-cost identity column: max x s.t. x + s = 1.
    #[test]
    fn single_row() {
        let c = vec![1.0, 0.0];
        let a = vec![vec![1.0, 1.0]];
        let sol = solve(&c, &a, &[1.0], &[1], 100).unwrap();
        assert!((sol.objective - 1.0).abs() < 1e-12);
        assert_eq!(sol.basis, vec![0]);
    }

    /// A degenerate LP known to cycle under naive most-negative pivoting
    /// terminates with Bland's rule.
    #[test]
    fn degenerate_terminates() {
        // Beale's example, in standard form with three slacks.
        let c = vec![0.75, -150.0, 0.02, -6.0, 0.0, 0.0, 0.0];
        let a = vec![
            vec![0.25, -60.0, -1.0 / 25.0, 9.0, 1.0, 0.0, 0.0],
            vec![0.5, -90.0, -1.0 / 50.0, 3.0, 0.0, 1.0, 0.0],
            vec![0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0],
        ];
        let b = vec![0.0, 0.0, 1.0];
        let sol = solve(&c, &a, &b, &[4, 5, 6], 10_000).unwrap();
        assert!((sol.objective - 0.05).abs() < 1e-9);
    }

    #[test]
    fn unbounded_detected() {
        let c = vec![1.0, 0.0];
        let a = vec![vec![-1.0, 1.0]];
        let err = solve(&c, &a, &[1.0], &[1], 100).unwrap_err();
        assert!(matches!(err, Error::Convergence(_)));
    }

    #[test]
    fn rejects_bad_basis() {
        let c = vec![1.0, 0.0];
        let a = vec![vec![1.0, 2.0]];
        assert!(solve(&c, &a, &[1.0], &[1], 100).is_err()); // column 1 not identity
        let c2 = vec![1.0, 1.0];
        let a2 = vec![vec![1.0, 1.0]];
        assert!(solve(&c2, &a2, &[1.0], &[1], 100).is_err()); // nonzero cost
    }
}
