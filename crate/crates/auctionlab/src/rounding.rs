//! Oblivious rounding of fractional allocations.
//!
//! Interpreting each player's column probabilities as a bundle distribution,
//! the scheme first draws a uniformly random winner, then either hands the
//! winner a direct draw from its own distribution (probability 1/2), or
//! hands it the intersection of `2^q` i.i.d. draws from *both* players'
//! distributions (probability `1/2^(q+2)` for `q` below the final level,
//! `1/2^(r+1)` at the final level `r`). The loser always receives the
//! complement, so every outcome is a partition.
//!
//! The branch probabilities are exact dyadic rationals summing to 1, and the
//! expected welfare can be computed exactly by propagating the intersection
//! distribution draw by draw.

use crate::configlp::FractionalAllocation;
use crate::sets::ItemSet;
use crate::valuations::Valuation;
use crate::welfare::Allocation;
use crate::{q, q_from_f64, Error, Q, Result, Rng};
use num::{One, ToPrimitive, Zero};
use rand::Rng as _;
use std::collections::HashMap;

/// Branch structure of the scheme for MPH rank `k`.
#[derive(Clone, Debug, PartialEq)]
pub struct RoundingPlan {
    k: u32,
    /// Final level: smallest `r` with `2^(2^r) >= k`.
    r: u32,
}

impl RoundingPlan {
    pub fn new(k: u32) -> Result<Self> {
        if k < 2 {
            return Err(Error::Parameter(format!("rank must be at least 2, got {k}")));
        }
        let mut r = 0;
        while (1u128 << (1u128 << r)) < k as u128 {
            r += 1;
        }
        Ok(RoundingPlan { k, r })
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn r(&self) -> u32 {
        self.r
    }

    /// Probability of the direct branch.
    pub fn lambda(&self) -> Q {
        q(1) / q(2)
    }

    /// Probability of intersection branch `q < r`.
    pub fn lambda_q(&self, level: u32) -> Q {
        assert!(level < self.r);
        q(1) / q(1i64 << (level + 2))
    }

    /// Probability of the final intersection branch.
    pub fn lambda_r(&self) -> Q {
        q(1) / q(1i64 << (self.r + 1))
    }

    /// All branches with their probabilities: `None` is the direct branch,
    /// `Some(q)` the intersection branch with `2^q` draws per player.
    pub fn branches(&self) -> Vec<(Option<u32>, Q)> {
        let mut out = vec![(None, self.lambda())];
        for level in 0..self.r {
            out.push((Some(level), self.lambda_q(level)));
        }
        out.push((Some(self.r), self.lambda_r()));
        out
    }

    /// The guarantee constant `1/2 + (1/2^(r+2)) (1 - k/4^(2^r))`. For
    /// `k = 2` this is exactly `5/8`.
    pub fn bound_constant(&self) -> Q {
        let four_pow = Q::from_integer(num::BigInt::from(4u32).pow(1u32 << self.r));
        q(1) / q(2) + (q(1) / q(1i64 << (self.r + 2))) * (q(1) - q(self.k as i64) / four_pow)
    }
}

/// Which branch produced an outcome.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Branch {
    /// The winner drew one bundle from its own distribution.
    Direct,
    /// The winner received the intersection of `2^level` draws per player.
    Intersect { level: u32 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Player {
    Alice,
    Bob,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RoundingOutcome {
    pub allocation: Allocation,
    pub branch: Branch,
    pub winner: Player,
}

impl FractionalAllocation {
    /// Exactly rescale each side to total mass 1 (the solver output can be
    /// off by its feasibility tolerance).
    pub fn normalized(&self) -> Result<FractionalAllocation> {
        let scale = |side: &[(ItemSet, Q)]| -> Result<Vec<(ItemSet, Q)>> {
            let mass: Q = side.iter().map(|(_, p)| p.clone()).sum();
            if mass.is_zero() {
                return Err(Error::Degenerate("empty bundle distribution".into()));
            }
            Ok(side.iter().map(|(s, p)| (*s, p / &mass)).collect())
        };
        FractionalAllocation::new(self.m(), scale(&self.alice)?, scale(&self.bob)?)
    }
}

fn draw(side: &[(ItemSet, Q)], rng: &mut Rng) -> Result<ItemSet> {
    if side.is_empty() {
        return Err(Error::Degenerate("empty bundle distribution".into()));
    }
    let total: f64 = side.iter().map(|(_, p)| p.to_f64().unwrap()).sum();
    let mut target = rng.gen::<f64>() * total;
    for (s, p) in side {
        target -= p.to_f64().unwrap();
        if target <= 0.0 {
            return Ok(*s);
        }
    }
    Ok(side.last().unwrap().0)
}

/// One run of the general scheme.
pub fn round_mphk(
    frac: &FractionalAllocation,
    plan: &RoundingPlan,
    rng: &mut Rng,
) -> Result<RoundingOutcome> {
    let winner = if rng.gen::<bool>() { Player::Alice } else { Player::Bob };
    let coin = rng.gen::<f64>();
    let mut acc = 0.0;
    let mut chosen = None;
    for (branch, prob) in plan.branches() {
        acc += prob.to_f64().unwrap();
        if coin < acc {
            chosen = Some(branch);
            break;
        }
    }
    let chosen = chosen.unwrap_or(Some(plan.r()));

    let winner_bundle = match chosen {
        None => match winner {
            Player::Alice => draw(&frac.alice, rng)?,
            Player::Bob => draw(&frac.bob, rng)?,
        },
        Some(level) => {
            let mut s = ItemSet::full(frac.m());
            for _ in 0..(1u32 << level) {
                s = s.intersection(&draw(&frac.alice, rng)?);
                s = s.intersection(&draw(&frac.bob, rng)?);
            }
            s
        }
    };
    let to_alice = match winner {
        Player::Alice => winner_bundle,
        Player::Bob => winner_bundle.complement(),
    };
    Ok(RoundingOutcome {
        allocation: Allocation { to_alice },
        branch: match chosen {
            None => Branch::Direct,
            Some(level) => Branch::Intersect { level },
        },
        winner,
    })
}

/// One run of the two-branch rank-2 scheme (the general plan at `k = 2`).
pub fn round_mph2(frac: &FractionalAllocation, rng: &mut Rng) -> Result<RoundingOutcome> {
    round_mphk(frac, &RoundingPlan::new(2)?, rng)
}

/// Distribution of the intersection of `draws` i.i.d. bundles from each
/// player, as a map from bit pattern to exact probability.
pub fn intersection_distribution(
    frac: &FractionalAllocation,
    draws: u32,
) -> Result<Vec<(u128, Q)>> {
    let mut dist: HashMap<u128, Q> = HashMap::new();
    let full = ItemSet::full(frac.m()).bits();
    dist.insert(full, Q::one());
    for _ in 0..draws {
        for side in [&frac.alice, &frac.bob] {
            if side.is_empty() {
                return Err(Error::Degenerate("empty bundle distribution".into()));
            }
            let mut next: HashMap<u128, Q> = HashMap::new();
            for (bits, prob) in &dist {
                for (s, p) in side {
                    let entry = next.entry(bits & s.bits()).or_insert_with(Q::zero);
                    *entry += prob * p;
                }
            }
            dist = next;
        }
    }
    Ok(dist.into_iter().collect())
}

fn budget_guard(frac: &FractionalAllocation, plan: &RoundingPlan) -> Result<()> {
    let s = frac.alice.len().max(frac.bob.len()) as u64;
    let exponent = 2u64 * (1u64 << plan.r());
    let mut cost = 1u64;
    for _ in 0..exponent {
        cost = cost.saturating_mul(s);
        if cost > 1_000_000 {
            return Err(Error::Budget(format!(
                "support size {s} with {exponent} draws exceeds the exact-expectation \
                 budget; use the Monte-Carlo evaluator"
            )));
        }
    }
    Ok(())
}

/// Exact expected welfare of the full scheme. The input is normalized to
/// unit mass per player first, matching the sampling semantics.
pub fn exact_expected_welfare(
    frac: &FractionalAllocation,
    plan: &RoundingPlan,
    va: &dyn Valuation,
    vb: &dyn Valuation,
) -> Result<Q> {
    if va.m() != frac.m() || vb.m() != frac.m() {
        return Err(Error::Parameter("ground-set mismatch".into()));
    }
    budget_guard(frac, plan)?;
    let frac = frac.normalized()?;
    let m = frac.m();
    let half = q(1) / q(2);

    // Direct branch: winner uniform, draws from its own distribution.
    let direct_for = |side: &[(ItemSet, Q)], winner: &dyn Valuation, loser: &dyn Valuation| {
        side.iter()
            .map(|(s, p)| (winner.value(s) + loser.value(&s.complement())) * p)
            .sum::<Q>()
    };
    let e_direct = half.clone() * direct_for(&frac.alice, va, vb)
        + half.clone() * direct_for(&frac.bob, vb, va);

    let mut total = plan.lambda() * e_direct;
    for (branch, prob) in plan.branches() {
        let Some(level) = branch else { continue };
        let dist = intersection_distribution(&frac, 1 << level)?;
        let mut e_branch = Q::zero();
        for (bits, p) in &dist {
            let s = ItemSet::from_bits(m, *bits);
            let sc = s.complement();
            // Winner uniform: half Alice-gets-S, half Bob-gets-S.
            e_branch += (va.value(&s) + vb.value(&sc) + va.value(&sc) + vb.value(&s))
                * p
                * &half;
        }
        total += prob * e_branch;
    }
    Ok(total)
}

/// Monte-Carlo expected welfare: `(mean, standard error)`.
pub fn mc_expected_welfare(
    frac: &FractionalAllocation,
    plan: &RoundingPlan,
    va: &dyn Valuation,
    vb: &dyn Valuation,
    trials: u64,
    rng: &mut Rng,
) -> Result<(f64, f64)> {
    if trials < 1000 {
        return Err(Error::Parameter("at least 1000 trials required".into()));
    }
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for _ in 0..trials {
        let outcome = round_mphk(frac, plan, rng)?;
        let w = outcome.allocation.welfare(va, vb).to_f64().unwrap();
        sum += w;
        sum_sq += w * w;
    }
    let n = trials as f64;
    let mean = sum / n;
    let variance = (sum_sq / n - mean * mean).max(0.0);
    Ok((mean, (variance / (n - 1.0)).sqrt()))
}

/// Guarantee verdict comparing the rounded expectation against the scheme's
/// bound constant times the fractional objective.
#[derive(Clone, Debug)]
pub struct GuaranteeReport {
    pub k: u32,
    /// Exact fractional objective of the (normalized) input.
    pub c: Q,
    /// Exact expectation when the budget allows, else the Monte-Carlo mean.
    pub expected: Q,
    /// Standard error; `None` when the expectation is exact.
    pub stderr: Option<f64>,
    pub bound_constant: Q,
    pub pass: bool,
}

impl GuaranteeReport {
    pub fn ratio(&self) -> f64 {
        (self.expected.clone() / &self.c).to_f64().unwrap()
    }
}

const MC_TRIALS: u64 = 100_000;

/// Check the rounding guarantee for MPH rank `k`, preferring the exact
/// evaluator and falling back to Monte Carlo (pass margin `3 * stderr`).
pub fn guarantee_check(
    frac: &FractionalAllocation,
    va: &dyn Valuation,
    vb: &dyn Valuation,
    k: u32,
    rng: &mut Rng,
) -> Result<GuaranteeReport> {
    let plan = RoundingPlan::new(k)?;
    let frac = frac.normalized()?;
    frac.check_feasible(1e-9)?;
    let c = frac.rational_objective(va, vb);
    let bound_constant = plan.bound_constant();
    let threshold = bound_constant.clone() * &c;

    match exact_expected_welfare(&frac, &plan, va, vb) {
        Ok(expected) => {
            let pass = expected.clone() >= threshold - q_from_f64(1e-9);
            Ok(GuaranteeReport { k, c, expected, stderr: None, bound_constant, pass })
        }
        Err(Error::Budget(_)) => {
            let (mean, stderr) = mc_expected_welfare(&frac, &plan, va, vb, MC_TRIALS, rng)?;
            let pass = q_from_f64(mean) >= threshold - q_from_f64(3.0 * stderr);
            Ok(GuaranteeReport {
                k,
                c,
                expected: q_from_f64(mean),
                stderr: Some(stderr),
                bound_constant,
                pass,
            })
        }
        Err(e) => Err(e),
    }
}
