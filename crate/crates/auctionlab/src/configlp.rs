//! The configuration LP for two bidders.
//!
//! Variables `x_i(S)` per bidder-bundle pair; each bidder's mass sums to 1
//! and each item is fractionally allocated at most once. Two solvers share
//! the simplex core: an exact solve over all `2^m` columns per player, and
//! demand-oracle column generation that starts from the empty and full
//! bundles and adds a column whenever a dual constraint is violated.
//!
//! The simplex runs in floating point; an exact-rational verification pass
//! re-checks feasibility of the returned columns and recomputes the
//! objective, so downstream gap statements do not inherit solver tolerance.

use crate::sets::ItemSet;
use crate::simplex;
use crate::valuations::{demand_query, Prices, QWire, Valuation};
use crate::welfare::max_welfare;
use crate::{q, q_from_f64, Error, Q, Result};
use num::{ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

/// Per-player lists of `(bundle, probability)` pairs with exact rational
/// probabilities.
#[derive(Clone, Debug, PartialEq)]
pub struct FractionalAllocation {
    m: u32,
    pub alice: Vec<(ItemSet, Q)>,
    pub bob: Vec<(ItemSet, Q)>,
}

/// Default feasibility tolerance of the floating-point pipeline.
pub const FEAS_TOL: f64 = 1e-9;
/// Default objective agreement tolerance between solvers.
pub const OBJ_TOL: f64 = 1e-6;

impl FractionalAllocation {
    pub fn new(m: u32, alice: Vec<(ItemSet, Q)>, bob: Vec<(ItemSet, Q)>) -> Result<Self> {
        for (s, prob) in alice.iter().chain(&bob) {
            if s.m() != m {
                return Err(Error::Parameter("bundle over a different ground set".into()));
            }
            if prob < &Q::zero() {
                return Err(Error::Parameter("negative probability".into()));
            }
        }
        Ok(FractionalAllocation { m, alice, bob })
    }

    pub fn m(&self) -> u32 {
        self.m
    }

    fn mass(side: &[(ItemSet, Q)]) -> Q {
        side.iter().map(|(_, p)| p.clone()).sum()
    }

    fn item_load(&self, j: u32) -> Q {
        self.alice
            .iter()
            .chain(&self.bob)
            .filter(|(s, _)| s.contains(j))
            .map(|(_, p)| p.clone())
            .sum()
    }

    /// Exact-rational feasibility: per-player masses within `tol` of 1 and
    /// every item load at most `1 + tol`.
    pub fn check_feasible(&self, tol: f64) -> Result<()> {
        let tol = q_from_f64(tol);
        let one = q(1);
        for (name, side) in [("alice", &self.alice), ("bob", &self.bob)] {
            let mass = Self::mass(side);
            let gap = if mass >= one { mass - &one } else { one.clone() - mass };
            if gap > tol {
                return Err(Error::Numerical(format!("{name}'s mass is off by {gap}")));
            }
        }
        for j in 0..self.m {
            let load = self.item_load(j);
            if load > one.clone() + &tol {
                return Err(Error::Numerical(format!("item {j} is overallocated: {load}")));
            }
        }
        Ok(())
    }

    /// Exact objective `sum_i sum_S v_i(S) x_i(S)`.
    pub fn rational_objective(&self, va: &dyn Valuation, vb: &dyn Valuation) -> Q {
        let a: Q = self.alice.iter().map(|(s, p)| va.value(s) * p).sum();
        let b: Q = self.bob.iter().map(|(s, p)| vb.value(s) * p).sum();
        a + b
    }
}

/// Primal/dual output of either solver.
#[derive(Clone, Debug)]
pub struct LpSolution {
    pub objective: f64,
    pub primal: FractionalAllocation,
    /// Per-player duals `(u_A, u_B)`.
    pub u: [f64; 2],
    /// Per-item dual prices.
    pub p: Vec<f64>,
    pub iterations: u64,
}

impl LpSolution {
    /// Exact objective of the returned columns after a rational feasibility
    /// re-check.
    pub fn verified_objective(&self, va: &dyn Valuation, vb: &dyn Valuation) -> Result<Q> {
        self.primal.check_feasible(FEAS_TOL)?;
        Ok(self.primal.rational_objective(va, vb))
    }
}

fn q_to_f64(x: &Q) -> f64 {
    x.to_f64().expect("finite rational")
}

/// Solve the LP restricted to the given column pools. Both pools must start
/// with the empty bundle (it seeds the identity basis).
fn solve_restricted(
    va: &dyn Valuation,
    vb: &dyn Valuation,
    pool_a: &[ItemSet],
    pool_b: &[ItemSet],
) -> Result<LpSolution> {
    let m = va.m() as usize;
    let (na, nb) = (pool_a.len(), pool_b.len());
    assert!(pool_a[0].is_empty() && pool_b[0].is_empty(), "pools must start with the empty bundle");
    let cols = na + nb + m;
    let rows = 2 + m;

    let mut c = vec![0.0; cols];
    for (idx, s) in pool_a.iter().enumerate() {
        c[idx] = q_to_f64(&va.value(s));
    }
    for (idx, s) in pool_b.iter().enumerate() {
        c[na + idx] = q_to_f64(&vb.value(s));
    }

    let mut a = vec![vec![0.0; cols]; rows];
    for (idx, s) in pool_a.iter().enumerate() {
        a[0][idx] = 1.0;
        for j in s.iter() {
            a[2 + j as usize][idx] = 1.0;
        }
    }
    for (idx, s) in pool_b.iter().enumerate() {
        a[1][na + idx] = 1.0;
        for j in s.iter() {
            a[2 + j as usize][na + idx] = 1.0;
        }
    }
    for j in 0..m {
        a[2 + j][na + nb + j] = 1.0;
    }
    let b = vec![1.0; rows];

    let mut basis = vec![0usize, na];
    basis.extend((0..m).map(|j| na + nb + j));
    let sol = simplex::solve(&c, &a, &b, &basis, 10_000 + 100 * cols as u64)?;

    let collect = |pool: &[ItemSet], offset: usize| {
        pool.iter()
            .enumerate()
            .filter(|(idx, _)| sol.x[offset + idx] > 1e-12)
            .map(|(idx, s)| (*s, q_from_f64(sol.x[offset + idx])))
            .collect::<Vec<_>>()
    };
    let primal = FractionalAllocation::new(
        va.m(),
        collect(pool_a, 0),
        collect(pool_b, na),
    )?;
    // The initial identity columns have zero cost, so each row's dual is the
    // negated final reduced cost of that column.
    let u = [-sol.reduced_costs[0], -sol.reduced_costs[na]];
    let p = (0..m)
        .map(|j| (-sol.reduced_costs[na + nb + j]).max(0.0))
        .collect();
    Ok(LpSolution { objective: sol.objective, primal, u, p, iterations: sol.iterations })
}

/// Exact solve by full column enumeration (`2^m` columns per player).
pub fn solve_exact(va: &dyn Valuation, vb: &dyn Valuation) -> Result<LpSolution> {
    let m = va.m();
    if vb.m() != m {
        return Err(Error::Parameter("valuations over different ground sets".into()));
    }
    if m > 12 {
        return Err(Error::Budget(format!("refusing 2 * 2^{m} columns")));
    }
    let pool: Vec<ItemSet> = (0u128..(1 << m)).map(|bits| ItemSet::from_bits(m, bits)).collect();
    solve_restricted(va, vb, &pool, &pool)
}

/// Column generation: solve restricted primals, price out with exact demand
/// queries, and stop when no dual constraint `u_i >= v_i(S) - p(S)` is
/// violated by more than `tol`.
pub fn solve_column_generation(
    va: &dyn Valuation,
    vb: &dyn Valuation,
    tol: f64,
) -> Result<LpSolution> {
    let m = va.m();
    if vb.m() != m {
        return Err(Error::Parameter("valuations over different ground sets".into()));
    }
    let mut pool_a = vec![ItemSet::empty(m), ItemSet::full(m)];
    let mut pool_b = pool_a.clone();
    let cap = 1000 * m as u64;
    let mut total_iterations = 0;
    for _ in 0..cap {
        let sol = solve_restricted(va, vb, &pool_a, &pool_b)?;
        total_iterations += sol.iterations;
        let prices = Prices::new(sol.p.iter().map(|&pj| q_from_f64(pj.max(0.0))).collect())?;
        let mut improved = false;
        for (player, v, pool, u) in [
            (0usize, va, &mut pool_a, sol.u[0]),
            (1, vb, &mut pool_b, sol.u[1]),
        ] {
            let best = demand_query(v, &prices)?;
            let utility = q_to_f64(&(v.value(&best) - prices.total(&best)));
            if utility > u + tol && !pool.contains(&best) {
                pool.push(best);
                improved = true;
            }
            let _ = player;
        }
        if !improved {
            return Ok(LpSolution { iterations: total_iterations, ..sol });
        }
    }
    Err(Error::Convergence(format!(
        "column generation did not settle within {cap} rounds"
    )))
}

/// Ratio of the exact integral optimum to the exact rational objective of a
/// fractional solution.
pub fn integrality_gap(
    va: &dyn Valuation,
    vb: &dyn Valuation,
    frac: &FractionalAllocation,
) -> Result<Q> {
    frac.check_feasible(FEAS_TOL)?;
    let c = frac.rational_objective(va, vb);
    if c.is_zero() {
        return Err(Error::Degenerate("zero fractional objective".into()));
    }
    Ok(max_welfare(va, vb)?.optimum / c)
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

/// JSON shape: `{objective, columns: [{player, set_hex, prob}], dual: {u, p}}`
/// with probabilities as exact `"num/den"` strings.
#[derive(Serialize, Deserialize)]
pub struct LpSolutionWire {
    pub objective: f64,
    pub m: u32,
    pub columns: Vec<ColumnWire>,
    pub dual: DualWire,
}

#[derive(Serialize, Deserialize)]
pub struct ColumnWire {
    pub player: String,
    pub set_hex: String,
    pub prob: QWire,
}

#[derive(Serialize, Deserialize)]
pub struct DualWire {
    pub u: [f64; 2],
    pub p: Vec<f64>,
}

impl LpSolution {
    pub fn to_wire(&self) -> LpSolutionWire {
        let mut columns = Vec::new();
        for (player, side) in [("alice", &self.primal.alice), ("bob", &self.primal.bob)] {
            for (s, prob) in side {
                columns.push(ColumnWire {
                    player: player.to_string(),
                    set_hex: s.to_hex(),
                    prob: QWire::of(prob),
                });
            }
        }
        LpSolutionWire {
            objective: self.objective,
            m: self.primal.m(),
            columns,
            dual: DualWire { u: self.u, p: self.p.clone() },
        }
    }

    pub fn from_wire(wire: &LpSolutionWire) -> Result<Self> {
        let mut alice = Vec::new();
        let mut bob = Vec::new();
        for col in &wire.columns {
            let s = ItemSet::from_hex(wire.m, &col.set_hex)?;
            let prob = col.prob.to_q()?;
            match col.player.as_str() {
                "alice" => alice.push((s, prob)),
                "bob" => bob.push((s, prob)),
                other => return Err(Error::Schema(format!("unknown player {other:?}"))),
            }
        }
        Ok(LpSolution {
            objective: wire.objective,
            primal: FractionalAllocation::new(wire.m, alice, bob)?,
            u: wire.dual.u,
            p: wire.dual.p.clone(),
            iterations: 0,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeded;
    use crate::valuations::{sample_monotone_subadditive, ExplicitValuation};

    fn explicit(m: u32, values: &[i64]) -> ExplicitValuation {
        ExplicitValuation::new(m, values.iter().map(|&v| q(v)).collect()).unwrap()
    }

    #[test]
    fn single_item_lp_is_integral() {
        let va = explicit(1, &[0, 1]);
        let vb = explicit(1, &[0, 2]);
        let sol = solve_exact(&va, &vb).unwrap();
        assert!((sol.objective - 2.0).abs() < 1e-9);
        assert_eq!(sol.verified_objective(&va, &vb).unwrap(), q(2));
        // Bob gets the item with probability 1.
        let bob_full: Q = sol
            .primal
            .bob
            .iter()
            .filter(|(s, _)| s.contains(0))
            .map(|(_, p)| p.clone())
            .sum();
        assert_eq!(bob_full, q(1));
    }

    #[test]
    fn lp_dominates_integral_optimum() {
        let mut rng = seeded(5);
        for _ in 0..20 {
            let va = sample_monotone_subadditive(5, &mut rng).unwrap();
            let vb = sample_monotone_subadditive(5, &mut rng).unwrap();
            let sol = solve_exact(&va, &vb).unwrap();
            let opt = max_welfare(&va, &vb).unwrap().optimum;
            assert!(q_from_f64(sol.objective + 1e-6) >= opt);
            // Dual prices are non-negative by construction; weak duality.
            let dual_obj: f64 = sol.u.iter().sum::<f64>() + sol.p.iter().sum::<f64>();
            assert!(dual_obj >= sol.objective - 1e-6);
        }
    }

    #[test]
    fn column_generation_matches_exact() {
        let mut rng = seeded(11);
        for _ in 0..20 {
            let va = sample_monotone_subadditive(6, &mut rng).unwrap();
            let vb = sample_monotone_subadditive(6, &mut rng).unwrap();
            let exact = solve_exact(&va, &vb).unwrap();
            let colgen = solve_column_generation(&va, &vb, 1e-9).unwrap();
            assert!(
                (exact.objective - colgen.objective).abs() < OBJ_TOL,
                "{} vs {}",
                exact.objective,
                colgen.objective
            );
        }
    }

    #[test]
    fn degenerate_bob_gives_full_bundle_to_alice() {
        let va = explicit(2, &[0, 1, 1, 2]);
        let vb = explicit(2, &[0, 0, 0, 0]);
        let sol = solve_column_generation(&va, &vb, 1e-9).unwrap();
        assert!((sol.objective - 2.0).abs() < 1e-9);
        let full_mass: Q = sol
            .primal
            .alice
            .iter()
            .filter(|(s, _)| *s == ItemSet::full(2))
            .map(|(_, p)| p.clone())
            .sum();
        assert_eq!(full_mass, q(1));
    }

    #[test]
    fn complementary_slackness_on_support() {
        let mut rng = seeded(3);
        let va = sample_monotone_subadditive(5, &mut rng).unwrap();
        let vb = sample_monotone_subadditive(5, &mut rng).unwrap();
        let sol = solve_exact(&va, &vb).unwrap();
        for (player, side, u) in [(0, &sol.primal.alice, sol.u[0]), (1, &sol.primal.bob, sol.u[1])]
        {
            for (s, _) in side {
                let v = if player == 0 { va.value(s) } else { vb.value(s) };
                let p_s: f64 = s.iter().map(|j| sol.p[j as usize]).sum();
                let slack = u - (q_to_f64(&v) - p_s);
                assert!(slack.abs() < 1e-6, "support column with dual slack {slack}");
            }
        }
    }

    #[test]
    fn feasibility_checker_catches_overload() {
        let m = 2;
        let full = ItemSet::full(m);
        let bad = FractionalAllocation::new(
            m,
            vec![(full, q(1))],
            vec![(full, q(1))],
        )
        .unwrap();
        assert!(bad.check_feasible(1e-9).is_err());
        let ok = FractionalAllocation::new(
            m,
            vec![(full, q(1))],
            vec![(ItemSet::empty(m), q(1))],
        )
        .unwrap();
        ok.check_feasible(1e-9).unwrap();
    }

    #[test]
    fn gap_is_one_when_lp_integral() {
        let va = explicit(1, &[0, 1]);
        let vb = explicit(1, &[0, 2]);
        let sol = solve_exact(&va, &vb).unwrap();
        assert_eq!(integrality_gap(&va, &vb, &sol.primal).unwrap(), q(1));
    }

    #[test]
    fn solution_json_roundtrip() {
        let va = explicit(2, &[0, 1, 1, 2]);
        let vb = explicit(2, &[0, 1, 1, 1]);
        let sol = solve_exact(&va, &vb).unwrap();
        let json = serde_json::to_string(&sol.to_wire()).unwrap();
        let back = LpSolution::from_wire(&serde_json::from_str(&json).unwrap()).unwrap();
        assert_eq!(back.primal, sol.primal);
        assert_eq!(back.u, sol.u);
    }
}
