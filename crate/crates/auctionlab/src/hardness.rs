//! Builders and verifiers for the hard instance families.
//!
//! Three constructions: the equality reduction (two cover valuations built
//! from an independent base collection oriented by private bit strings), the
//! far-sets / exist-far-sets promise problems with their welfare-gap
//! verifier, and the integrality-gap instances (the fixed 4-item rank-2
//! instance and the symmetric cover-valuation family).

use crate::configlp::FractionalAllocation;
use crate::sets::{
    check_l_compatible, is_l_independent, sample_compatible_pair, ItemSet, Sampled,
    SetCollection, DEFAULT_ATTEMPT_CAP,
};
use crate::valuations::{CoverValuation, MphRepresentation};
use crate::welfare::{max_welfare, Allocation};
use crate::{q, Error, Q, Result, Rng};
use rand::seq::index::sample as index_sample;

/// Orient a base collection by a bit string (bit `i` set keeps `S_i`, clear
/// takes the complement) and wrap the result in a cover valuation.
///
/// Independence of the base guarantees that *every* orientation is sparse,
/// hence every derived valuation is well-formed.
pub fn build_equality_instance(
    base: &SetCollection,
    a: u64,
    b: u64,
    l: u32,
) -> Result<(CoverValuation, CoverValuation)> {
    let k = base.k();
    if k > 64 {
        return Err(Error::Parameter("at most 64 base sets supported".into()));
    }
    let mask = if k == 64 { u64::MAX } else { (1u64 << k) - 1 };
    if a & !mask != 0 || b & !mask != 0 {
        return Err(Error::Parameter(format!("bit string beyond {k} bits")));
    }
    if !is_l_independent(base, l)? {
        return Err(Error::Construction(format!(
            "base collection is not {l}-independent"
        )));
    }
    let va = CoverValuation::new(base.oriented(a), l)?;
    let vb = CoverValuation::new(base.oriented(b), l)?;
    Ok((va, vb))
}

/// Answer of the two-set promise problem.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FarSets {
    /// `|X symmetric-difference Y| = 2`.
    Near,
    /// `|X intersect Y| = 2`.
    Far,
    /// Neither branch holds — diagnostic only.
    PromiseViolated,
}

pub fn far_sets_answer(x: &ItemSet, y: &ItemSet) -> FarSets {
    if x.symmetric_difference(y).len() == 2 {
        FarSets::Near
    } else if x.intersection(y).len() == 2 {
        FarSets::Far
    } else {
        FarSets::PromiseViolated
    }
}

/// A compatible pair of collections with per-index promise answers.
#[derive(Clone, Debug)]
pub struct EfsInstance {
    pub x: SetCollection,
    pub y: SetCollection,
    pub l: u32,
    /// Per-index far-sets answers; compatibility guarantees no violations.
    pub answers: Vec<FarSets>,
}

impl EfsInstance {
    /// Wrap verified collections; fails if the compatibility promise or the
    /// per-index promises do not hold.
    pub fn new(x: SetCollection, y: SetCollection, l: u32) -> Result<Self> {
        let report = check_l_compatible(&x, &y, l)?;
        if !report.all() {
            return Err(Error::Construction(format!(
                "collections are not {l}-compatible: {report:?}"
            )));
        }
        let answers: Vec<FarSets> = (0..x.k())
            .map(|i| far_sets_answer(x.get(i), y.get(i)))
            .collect();
        if answers.contains(&FarSets::PromiseViolated) {
            return Err(Error::Construction("per-index promise violated".into()));
        }
        Ok(EfsInstance { x, y, l, answers })
    }

    /// Sample an instance with the given far index set.
    pub fn sample(
        m: u32,
        k: usize,
        l: u32,
        far_indices: &[usize],
        rng: &mut Rng,
    ) -> Result<Sampled<EfsInstance>> {
        let pair = sample_compatible_pair(m, k, l, far_indices, rng)?;
        let (x, y) = pair.value;
        let instance = EfsInstance::new(x, y, l)?;
        for (i, answer) in instance.answers.iter().enumerate() {
            let expected = if far_indices.contains(&i) { FarSets::Far } else { FarSets::Near };
            if *answer != expected {
                return Err(Error::Construction(format!(
                    "sampled index {i} answered {answer:?}, expected {expected:?}"
                )));
            }
        }
        Ok(Sampled { value: instance, attempts: pair.attempts })
    }

    /// The existential answer: OR over the per-index answers.
    pub fn exist_far_sets_answer(&self) -> bool {
        self.answers.contains(&FarSets::Far)
    }

    pub fn valuations(&self) -> Result<(CoverValuation, CoverValuation)> {
        Ok((
            CoverValuation::new(self.x.clone(), self.l)?,
            CoverValuation::new(self.y.clone(), self.l)?,
        ))
    }
}

/// Welfare-gap verdict for an instance.
#[derive(Clone, Debug)]
pub struct EfsGapReport {
    pub answer: bool,
    /// Far case: `(index, allocation, welfare)` of the exhibited witness.
    pub witness: Option<(usize, Allocation, Q)>,
    /// Near case: the exhaustive maximum welfare (ground sets up to 16).
    pub near_max: Option<Q>,
    pub pass: bool,
}

/// Check the welfare gap: a far index yields a witness of welfare at least
/// `2(l-1)`; an all-near instance has exhaustive maximum at most `l+1`.
pub fn verify_efs_gap(instance: &EfsInstance) -> Result<EfsGapReport> {
    let (va, vb) = instance.valuations()?;
    let l = instance.l;
    if let Some(i) = instance.answers.iter().position(|a| *a == FarSets::Far) {
        // Alice holds the X-side valuation; giving her Y_i leaves Bob the
        // complement, which sits inside Y_i's own collection member.
        let alloc = Allocation { to_alice: *instance.y.get(i) };
        let welfare = alloc.welfare(&va, &vb);
        let pass = welfare >= q(2) * q(l as i64 - 1);
        return Ok(EfsGapReport { answer: true, witness: Some((i, alloc, welfare)), near_max: None, pass });
    }
    let best = max_welfare(&va, &vb)?;
    let pass = best.optimum <= q(l as i64 + 1);
    Ok(EfsGapReport { answer: false, witness: None, near_max: Some(best.optimum), pass })
}

/// The fixed 4-item rank-2 gap instance: Alice wants `{a,b}` or `{c,d}`, Bob
/// wants `{a,c}` or `{b,d}`, and the half-weight fractional solution packs
/// both players perfectly.
pub fn mph2_gap_instance() -> (MphRepresentation, MphRepresentation, FractionalAllocation) {
    let m = 4;
    let pair = |i, j| ItemSet::from_indices(m, &[i, j]);
    let clause = |s: ItemSet| vec![(s, q(1))];
    let alice = MphRepresentation::new(m, 2, vec![clause(pair(0, 1)), clause(pair(2, 3))])
        .expect("fixed instance is well-formed");
    let bob = MphRepresentation::new(m, 2, vec![clause(pair(0, 2)), clause(pair(1, 3))])
        .expect("fixed instance is well-formed");
    let half = q(1) / q(2);
    let frac = FractionalAllocation::new(
        m,
        vec![(pair(0, 1), half.clone()), (pair(2, 3), half.clone())],
        vec![(pair(0, 2), half.clone()), (pair(1, 3), half)],
    )
    .expect("fixed instance is feasible");
    (alice, bob, frac)
}

/// Symmetric cover-valuation gap instance for MPH rank `k`: `t = ceil(sqrt(k))`
/// sets over a ground set of `k` items, with the fractional solution putting
/// mass `1/t` on each complement bundle for both players.
///
/// Every item is placed in exactly `ceil(t/2)` sets, which makes the `1/t`
/// solution exactly feasible (item load `2(t - ceil(t/2))/t <= 1`); sampling
/// retries until the collection is 4-sparse. Sparsity forces some item to
/// avoid any `l - 1` chosen sets, so its degree is at most `t - l + 1`;
/// combined with the degree floor this needs `t >= 2(l-1)`, i.e. `k >= 26`
/// at `l = 4` — below that no instance of this shape exists at all.
pub fn build_gap_instance_mphk(
    k: u32,
    rng: &mut Rng,
) -> Result<(CoverValuation, CoverValuation, FractionalAllocation)> {
    let l = 4u32;
    let t = (k as f64).sqrt().ceil() as u32;
    if t < 2 * (l - 1) {
        return Err(Error::Parameter(format!(
            "rank {k} gives t = {t} < {}; sparsity and feasibility are jointly \
             impossible below that",
            2 * (l - 1)
        )));
    }
    let m = k;
    let degree = t.div_ceil(2) as usize;
    for attempt in 1..=DEFAULT_ATTEMPT_CAP {
        // Choose each item's membership: a uniform degree-sized subset of
        // the t sets.
        let mut members: Vec<ItemSet> = vec![ItemSet::empty(m); t as usize];
        for item in 0..m {
            for idx in index_sample(rng, t as usize, degree) {
                members[idx].insert(item);
            }
        }
        let collection = SetCollection::new(m, members);
        if !crate::sets::is_l_sparse(&collection, l)? {
            continue;
        }
        let va = CoverValuation::new(collection.clone(), l)?;
        let vb = CoverValuation::new(collection, l)?;
        let share = q(1) / q(t as i64);
        let columns: Vec<(ItemSet, Q)> = va
            .collection()
            .sets()
            .iter()
            .map(|s| (s.complement(), share.clone()))
            .collect();
        let frac = FractionalAllocation::new(m, columns.clone(), columns)?;
        frac.check_feasible(0.0)?;
        let _ = attempt;
        return Ok((va, vb, frac));
    }
    Err(Error::SamplingFailure {
        attempts: DEFAULT_ATTEMPT_CAP,
        context: format!("no {l}-sparse degree-{degree} collection at k={k}"),
    })
}
