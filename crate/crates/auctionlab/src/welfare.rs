//! Exact two-bidder welfare maximization and baseline protocols.
//!
//! An allocation is a bipartition of the ground set: Alice receives a bundle,
//! Bob its complement. Everything here enumerates the `2^m` partitions, so it
//! is exact but restricted to small ground sets.

use crate::sets::ItemSet;
use crate::valuations::Valuation;
use crate::{q, Error, Q, Result, Rng};
use num::Zero;
use rand::Rng as _;

/// A total bipartition: Bob implicitly receives the complement.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Allocation {
    pub to_alice: ItemSet,
}

impl Allocation {
    pub fn to_bob(&self) -> ItemSet {
        self.to_alice.complement()
    }

    pub fn welfare(&self, va: &dyn Valuation, vb: &dyn Valuation) -> Q {
        va.value(&self.to_alice) + vb.value(&self.to_bob())
    }
}

/// Exact optimum with a witness allocation.
#[derive(Clone, Debug, PartialEq)]
pub struct WelfareResult {
    pub optimum: Q,
    pub witness: Allocation,
}

fn check_pair(va: &dyn Valuation, vb: &dyn Valuation) -> Result<u32> {
    let m = va.m();
    if vb.m() != m {
        return Err(Error::Parameter("valuations over different ground sets".into()));
    }
    if m > 20 {
        return Err(Error::Budget(format!("refusing 2^{m} partition scan")));
    }
    Ok(m)
}

/// Exhaustive welfare maximization; ties resolve to the lexicographically
/// smallest Alice bundle.
pub fn max_welfare(va: &dyn Valuation, vb: &dyn Valuation) -> Result<WelfareResult> {
    let m = check_pair(va, vb)?;
    let mut witness = Allocation { to_alice: ItemSet::empty(m) };
    let mut optimum = witness.welfare(va, vb);
    for bits in 1u128..(1 << m) {
        let alloc = Allocation { to_alice: ItemSet::from_bits(m, bits) };
        let w = alloc.welfare(va, vb);
        if w > optimum {
            optimum = w;
            witness = alloc;
        }
    }
    Ok(WelfareResult { optimum, witness })
}

/// Answer of the gap decision problem.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Decision {
    /// Some partition reaches the target.
    Yes,
    /// Every partition falls below `alpha` times the target.
    No,
    /// The optimum lies in the gap; the promise did not hold. Diagnostic
    /// value — a gap algorithm may answer arbitrarily here.
    PromiseViolated,
}

/// Decide whether welfare `target` is reachable, under the promise that the
/// optimum is either `>= target` or `< alpha * target`.
pub fn decide_welfare(
    va: &dyn Valuation,
    vb: &dyn Valuation,
    target: &Q,
    alpha: &Q,
) -> Result<Decision> {
    if alpha <= &Q::zero() || alpha > &q(1) {
        return Err(Error::Parameter(format!("alpha must be in (0, 1], got {alpha}")));
    }
    let opt = max_welfare(va, vb)?.optimum;
    Ok(if opt >= *target {
        Decision::Yes
    } else if opt < alpha.clone() * target {
        Decision::No
    } else {
        Decision::PromiseViolated
    })
}

/// Exact (or Monte-Carlo, for the per-item protocol at large `m`) expected
/// welfare of the three zero/constant-communication baselines.
#[derive(Clone, Debug, PartialEq)]
pub struct TrivialProtocolReport {
    /// All of `M` to a uniformly random player.
    pub random_player: Q,
    /// Each item independently to a fair coin.
    pub per_item: Q,
    /// Whether `per_item` is an exact enumeration or a 10^4-sample mean.
    pub per_item_exact: bool,
    /// Grand bundle to the player valuing it most.
    pub grand_bundle: Q,
}

const PER_ITEM_EXACT_LIMIT: u32 = 12;
const PER_ITEM_MC_TRIALS: u64 = 10_000;

pub fn trivial_protocols(
    va: &dyn Valuation,
    vb: &dyn Valuation,
    rng: &mut Rng,
) -> Result<TrivialProtocolReport> {
    let m = check_pair(va, vb)?;
    let full = ItemSet::full(m);
    let va_m = va.value(&full);
    let vb_m = vb.value(&full);
    let random_player = (va_m.clone() + vb_m.clone()) / q(2);
    let grand_bundle = va_m.max(vb_m);

    let per_item_exact = m <= PER_ITEM_EXACT_LIMIT;
    let per_item = if per_item_exact {
        let mut total = Q::zero();
        for bits in 0u128..(1 << m) {
            let alloc = Allocation { to_alice: ItemSet::from_bits(m, bits) };
            total += alloc.welfare(va, vb);
        }
        total / q(1i64 << m)
    } else {
        let mask = if m == 128 { u128::MAX } else { (1u128 << m) - 1 };
        let mut total = Q::zero();
        for _ in 0..PER_ITEM_MC_TRIALS {
            let bits = rng.gen::<u128>() & mask;
            let alloc = Allocation { to_alice: ItemSet::from_bits(m, bits) };
            total += alloc.welfare(va, vb);
        }
        total / q(PER_ITEM_MC_TRIALS as i64)
    };

    Ok(TrivialProtocolReport { random_player, per_item, per_item_exact, grand_bundle })
}

/// Output of the near-additivity protocol: a small allocation distribution
/// with an exact expectation and a certified lower bound derived from the
/// case analysis (two-point `{T, complement}` when Alice's values split
/// super-additively across some partition, grand bundle otherwise).
#[derive(Clone, Debug, PartialEq)]
pub struct NearAdditiveOutcome {
    /// `(allocation, probability)` pairs; probabilities sum to 1.
    pub distribution: Vec<(Allocation, Q)>,
    /// `(max_T (v1(T) + v1(T-bar)) - v1(M)) / (4 v1(M))` for the pivot player.
    pub epsilon_star: Q,
    /// Certified lower bound on the expected welfare. Valid whenever both
    /// inputs are monotone subadditive.
    pub certified: Q,
    /// Exact expected welfare of the returned distribution.
    pub expected: Q,
}

/// Deterministic protocol exploiting near-additivity.
///
/// With `T*` maximizing `v1(T) + v1(T-bar)` and
/// `eps* = (v1(T*) + v1(T*-bar) - v1(M)) / (4 v1(M))`: if `eps* > 0` and
/// `v1(M) >= OPT/4`, allocate player 1 either `T*` or its complement with
/// probability 1/2 each, certified at `OPT/2 + 2 eps* v1(M)`; otherwise hand
/// the grand bundle to the player valuing it most, certified at that value.
/// The pivot player is the one with the larger grand-bundle value (this also
/// covers `vA(M) = 0` by role swap).
pub fn near_additive_protocol(
    va: &dyn Valuation,
    vb: &dyn Valuation,
) -> Result<NearAdditiveOutcome> {
    let m = check_pair(va, vb)?;
    let full = ItemSet::full(m);
    let alice_pivot = va.value(&full) >= vb.value(&full);
    let (v1, _v2): (&dyn Valuation, &dyn Valuation) =
        if alice_pivot { (va, vb) } else { (vb, va) };

    let v1_m = v1.value(&full);
    if v1_m.is_zero() {
        // Both valuations are identically zero on M; any allocation works.
        let alloc = Allocation { to_alice: ItemSet::empty(m) };
        let expected = alloc.welfare(va, vb);
        return Ok(NearAdditiveOutcome {
            distribution: vec![(alloc, q(1))],
            epsilon_star: Q::zero(),
            certified: Q::zero(),
            expected,
        });
    }

    let mut best_split = v1_m.clone();
    let mut best_t = ItemSet::empty(m);
    for bits in 0u128..(1 << m) {
        let t = ItemSet::from_bits(m, bits);
        let split = v1.value(&t) + v1.value(&t.complement());
        if split > best_split {
            best_split = split;
            best_t = t;
        }
    }
    let epsilon_star = (best_split - &v1_m) / (q(4) * &v1_m);
    let opt = max_welfare(va, vb)?.optimum;

    if epsilon_star > Q::zero() && q(4) * &v1_m >= opt {
        let half = q(1) / q(2);
        let t_alice = if alice_pivot { best_t } else { best_t.complement() };
        let a1 = Allocation { to_alice: t_alice };
        let a2 = Allocation { to_alice: t_alice.complement() };
        let expected = (a1.welfare(va, vb) + a2.welfare(va, vb)) / q(2);
        let certified = opt / q(2) + q(2) * &epsilon_star * v1_m;
        return Ok(NearAdditiveOutcome {
            distribution: vec![(a1, half.clone()), (a2, half)],
            epsilon_star,
            certified,
            expected,
        });
    }

    let to_alice = if alice_pivot { full } else { ItemSet::empty(m) };
    let alloc = Allocation { to_alice };
    let expected = alloc.welfare(va, vb);
    Ok(NearAdditiveOutcome {
        distribution: vec![(alloc, q(1))],
        epsilon_star,
        certified: v1_m,
        expected,
    })
}
