//! Ground-set and set-collection algebra.
//!
//! `ItemSet` is a fixed-width (128-bit) bit set over items `0..m`. All
//! sparsity / independence / compatibility predicates and the samplers that
//! feed the hard-instance builders live here, together with the link/chain
//! combinatorics used by the counting cross-checks.

use crate::{budget, Error, Result, Rng};
use itertools::Itertools;
use num::BigUint;
use rand::Rng as _;
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::fmt;

/// A subset of the ground set `[m]`, `4 <= m <= 128`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ItemSet {
    bits: u128,
    m: u32,
}

impl ItemSet {
    pub fn empty(m: u32) -> Self {
        assert!(m >= 1 && m <= 128, "ground set size out of range: {m}");
        ItemSet { bits: 0, m }
    }

    pub fn full(m: u32) -> Self {
        Self::empty(m).complement()
    }

    pub fn from_bits(m: u32, bits: u128) -> Self {
        let s = Self::empty(m);
        assert_eq!(bits & !s.mask(), 0, "bit set beyond ground set");
        ItemSet { bits, m }
    }

    pub fn from_indices(m: u32, indices: &[u32]) -> Self {
        let mut s = Self::empty(m);
        for &i in indices {
            assert!(i < m, "item {i} outside ground set of size {m}");
            s.bits |= 1u128 << i;
        }
        s
    }

    fn mask(&self) -> u128 {
        if self.m == 128 {
            u128::MAX
        } else {
            (1u128 << self.m) - 1
        }
    }

    pub fn m(&self) -> u32 {
        self.m
    }

    pub fn bits(&self) -> u128 {
        self.bits
    }

    pub fn len(&self) -> u32 {
        self.bits.count_ones()
    }

    pub fn is_empty(&self) -> bool {
        self.bits == 0
    }

    pub fn contains(&self, item: u32) -> bool {
        item < self.m && self.bits & (1u128 << item) != 0
    }

    pub fn insert(&mut self, item: u32) {
        assert!(item < self.m);
        self.bits |= 1u128 << item;
    }

    pub fn remove(&mut self, item: u32) {
        assert!(item < self.m);
        self.bits &= !(1u128 << item);
    }

    pub fn union(&self, other: &Self) -> Self {
        self.check_ground(other);
        ItemSet { bits: self.bits | other.bits, m: self.m }
    }

    pub fn intersection(&self, other: &Self) -> Self {
        self.check_ground(other);
        ItemSet { bits: self.bits & other.bits, m: self.m }
    }

    pub fn difference(&self, other: &Self) -> Self {
        self.check_ground(other);
        ItemSet { bits: self.bits & !other.bits, m: self.m }
    }

    pub fn symmetric_difference(&self, other: &Self) -> Self {
        self.check_ground(other);
        ItemSet { bits: self.bits ^ other.bits, m: self.m }
    }

    pub fn complement(&self) -> Self {
        ItemSet { bits: !self.bits & self.mask(), m: self.m }
    }

    pub fn is_subset(&self, other: &Self) -> bool {
        self.check_ground(other);
        self.bits & !other.bits == 0
    }

    pub fn iter(&self) -> impl Iterator<Item = u32> + '_ {
        (0..self.m).filter(|&i| self.contains(i))
    }

    pub fn indices(&self) -> Vec<u32> {
        self.iter().collect()
    }

    /// Hex rendering of the bit pattern (item 0 = least significant bit).
    pub fn to_hex(&self) -> String {
        format!("{:x}", self.bits)
    }

    pub fn from_hex(m: u32, hex: &str) -> Result<Self> {
        let bits = u128::from_str_radix(hex, 16)
            .map_err(|e| Error::Schema(format!("bad hex bit string {hex:?}: {e}")))?;
        let proto = Self::empty(m);
        if bits & !proto.mask() != 0 {
            return Err(Error::Schema(format!(
                "hex bit string {hex:?} has bits beyond ground set of size {m}"
            )));
        }
        Ok(ItemSet { bits, m })
    }

    fn check_ground(&self, other: &Self) {
        assert_eq!(self.m, other.m, "mismatched ground sets");
    }
}

impl fmt::Debug for ItemSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (pos, i) in self.iter().enumerate() {
            if pos > 0 {
                write!(f, ",")?;
            }
            write!(f, "{i}")?;
        }
        write!(f, "}}/{}", self.m)
    }
}

/// An ordered collection of subsets over a common ground set.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SetCollection {
    m: u32,
    sets: Vec<ItemSet>,
}

impl SetCollection {
    pub fn new(m: u32, sets: Vec<ItemSet>) -> Self {
        for s in &sets {
            assert_eq!(s.m(), m, "member over a different ground set");
        }
        SetCollection { m, sets }
    }

    pub fn m(&self) -> u32 {
        self.m
    }

    pub fn k(&self) -> usize {
        self.sets.len()
    }

    pub fn sets(&self) -> &[ItemSet] {
        &self.sets
    }

    pub fn get(&self, i: usize) -> &ItemSet {
        &self.sets[i]
    }

    /// Union of all members.
    pub fn coverage(&self) -> ItemSet {
        self.sets
            .iter()
            .fold(ItemSet::empty(self.m), |acc, s| acc.union(s))
    }

    /// Replace each member by itself or its complement according to
    /// `orientation` (bit i set keeps `S_i`, clear takes the complement).
    pub fn oriented(&self, orientation: u64) -> SetCollection {
        assert!(self.k() <= 64);
        let sets = self
            .sets
            .iter()
            .enumerate()
            .map(|(i, s)| {
                if orientation & (1 << i) != 0 {
                    *s
                } else {
                    s.complement()
                }
            })
            .collect();
        SetCollection { m: self.m, sets }
    }
}

// JSON schema: {"m": int, "sets": [[item indices]]}; a member may also be a
// hex bit string.
#[derive(Serialize, Deserialize)]
struct CollectionWire {
    m: u32,
    sets: Vec<MemberWire>,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum MemberWire {
    Indices(Vec<u32>),
    Hex(String),
}

impl Serialize for SetCollection {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        CollectionWire {
            m: self.m,
            sets: self
                .sets
                .iter()
                .map(|s| MemberWire::Indices(s.indices()))
                .collect(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for SetCollection {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let wire = CollectionWire::deserialize(deserializer)?;
        if wire.m < 1 || wire.m > 128 {
            return Err(D::Error::custom(format!("m out of range: {}", wire.m)));
        }
        let mut sets = Vec::with_capacity(wire.sets.len());
        for member in &wire.sets {
            let s = match member {
                MemberWire::Indices(idx) => {
                    for &i in idx {
                        if i >= wire.m {
                            return Err(D::Error::custom(format!(
                                "item {i} outside ground set of size {}",
                                wire.m
                            )));
                        }
                    }
                    ItemSet::from_indices(wire.m, idx)
                }
                MemberWire::Hex(h) => {
                    ItemSet::from_hex(wire.m, h).map_err(D::Error::custom)?
                }
            };
            sets.push(s);
        }
        Ok(SetCollection::new(wire.m, sets))
    }
}

fn check_l(l: u32) -> Result<()> {
    if l < 4 || l % 2 != 0 {
        return Err(Error::Parameter(format!(
            "l must be an even integer >= 4, got {l}"
        )));
    }
    Ok(())
}

fn binomial(n: u64, k: u64) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc = 1u64;
    for i in 0..k {
        acc = acc.saturating_mul(n - i) / (i + 1);
    }
    acc
}

/// No union of at most `l - 1` members equals the ground set.
///
/// Unions are idempotent, so quantifying over index subsets of size at most
/// `l - 1` is equivalent to quantifying over multisets of that many members.
pub fn is_l_sparse(collection: &SetCollection, l: u32) -> Result<bool> {
    check_l(l)?;
    let k = collection.k() as u64;
    let limit = (l - 1) as u64;
    let cost: u64 = (0..=limit.min(k)).map(|i| binomial(k, i)).sum();
    if cost > budget() {
        return Err(Error::Budget(format!(
            "sparsity check needs {cost} index subsets (budget {})",
            budget()
        )));
    }
    let full = ItemSet::full(collection.m()).bits();
    for size in 1..=(limit.min(k) as usize) {
        for combo in (0..collection.k()).combinations(size) {
            let mut union = 0u128;
            for i in combo {
                union |= collection.get(i).bits();
            }
            if union == full {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// Every orientation (each member replaced by itself or its complement) of
/// every index subset of size at most `l - 1` fails to cover the ground set.
pub fn is_l_independent(collection: &SetCollection, l: u32) -> Result<bool> {
    check_l(l)?;
    let k = collection.k() as u64;
    let limit = (l - 1) as u64;
    let cost: u64 = (0..=limit.min(k))
        .map(|i| binomial(k, i).saturating_mul(1u64 << i))
        .sum();
    if cost > budget() {
        return Err(Error::Budget(format!(
            "independence check needs {cost} oriented subsets (budget {})",
            budget()
        )));
    }
    let full = ItemSet::full(collection.m()).bits();
    for size in 1..=(limit.min(k) as usize) {
        for combo in (0..collection.k()).combinations(size) {
            for orientation in 0u32..(1 << size) {
                let mut union = 0u128;
                for (pos, &i) in combo.iter().enumerate() {
                    let s = collection.get(i);
                    union |= if orientation & (1 << pos) != 0 {
                        s.complement().bits()
                    } else {
                        s.bits()
                    };
                }
                if union == full {
                    return Ok(false);
                }
            }
        }
    }
    Ok(true)
}

/// Outcome of a rejection sampler, carrying the attempt count.
#[derive(Clone, Debug)]
pub struct Sampled<T> {
    pub value: T,
    pub attempts: u64,
}

pub const DEFAULT_ATTEMPT_CAP: u64 = 10_000;

/// Rejection-sample fair-coin membership collections until one is
/// `l`-independent.
pub fn sample_l_independent(
    m: u32,
    l: u32,
    k: usize,
    rng: &mut Rng,
) -> Result<Sampled<SetCollection>> {
    sample_l_independent_capped(m, l, k, rng, DEFAULT_ATTEMPT_CAP)
}

pub fn sample_l_independent_capped(
    m: u32,
    l: u32,
    k: usize,
    rng: &mut Rng,
    cap: u64,
) -> Result<Sampled<SetCollection>> {
    check_l(l)?;
    let check_cost = binomial(k as u64, (l - 1) as u64).saturating_mul(1 << (l - 1));
    if check_cost > budget() {
        return Err(Error::Budget(format!(
            "independence check per attempt costs {check_cost} (budget {})",
            budget()
        )));
    }
    for attempt in 1..=cap {
        let sets = (0..k)
            .map(|_| {
                let mut s = ItemSet::empty(m);
                for item in 0..m {
                    if rng.gen::<bool>() {
                        s.insert(item);
                    }
                }
                s
            })
            .collect();
        let candidate = SetCollection::new(m, sets);
        if is_l_independent(&candidate, l)? {
            return Ok(Sampled { value: candidate, attempts: attempt });
        }
    }
    Err(Error::SamplingFailure {
        attempts: cap,
        context: format!("no {l}-independent fair-coin collection at m={m}, k={k}"),
    })
}

/// Uniformly random subset of size `m/2 + 1` (partial Fisher-Yates).
pub fn sample_halfset(m: u32, rng: &mut Rng) -> Result<ItemSet> {
    if m % 2 != 0 {
        return Err(Error::Parameter(format!("m must be even, got {m}")));
    }
    let target = (m / 2 + 1) as usize;
    let mut pool: Vec<u32> = (0..m).collect();
    for i in 0..target {
        let j = rng.gen_range(i..pool.len());
        pool.swap(i, j);
    }
    Ok(ItemSet::from_indices(m, &pool[..target]))
}

/// One draw from the link distribution: `X` uniform of size `m/2 + 1`, `Y`
/// obtained by swapping one uniform element of `X` for one uniform element
/// outside it, so `|X triangle Y| = 2`.
pub fn sample_mu_link(m: u32, rng: &mut Rng) -> Result<(ItemSet, ItemSet)> {
    let x = sample_halfset(m, rng)?;
    let y = swap_one(&x, rng);
    Ok((x, y))
}

fn swap_one(x: &ItemSet, rng: &mut Rng) -> ItemSet {
    let inside = x.indices();
    let outside = x.complement().indices();
    let drop = inside[rng.gen_range(0..inside.len())];
    let add = outside[rng.gen_range(0..outside.len())];
    let mut y = *x;
    y.remove(drop);
    y.insert(add);
    y
}

/// Per-condition result of the four-part compatibility predicate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompatibilityReport {
    /// (1) every member of both collections has size `m/2 + 1`.
    pub sizes_ok: bool,
    /// (2) per index, `|X_i triangle Y_i| = 2` or `|X_i intersect Y_i| = 2`.
    pub promise_ok: bool,
    /// (3) both collections are `l`-sparse.
    pub sparse_ok: bool,
    /// (4) every subset of size `< l/2` is contained in some member of each
    /// collection.
    pub small_sets_covered: bool,
}

impl CompatibilityReport {
    pub fn all(&self) -> bool {
        self.sizes_ok && self.promise_ok && self.sparse_ok && self.small_sets_covered
    }
}

/// Evaluate all four compatibility conditions.
///
/// Condition (4) is checked by enumerating the subsets of size exactly
/// `l/2 - 1`; containment of every smaller subset follows because each is
/// inside some subset of that size.
pub fn check_l_compatible(
    x: &SetCollection,
    y: &SetCollection,
    l: u32,
) -> Result<CompatibilityReport> {
    check_l(l)?;
    if x.m() != y.m() || x.k() != y.k() {
        return Err(Error::Parameter(format!(
            "collections disagree: m {} vs {}, k {} vs {}",
            x.m(),
            y.m(),
            x.k(),
            y.k()
        )));
    }
    let m = x.m();
    if m % 2 != 0 {
        return Err(Error::Parameter(format!("m must be even, got {m}")));
    }
    let half = m / 2 + 1;

    let sizes_ok = x.sets().iter().chain(y.sets()).all(|s| s.len() == half);
    let promise_ok = (0..x.k()).all(|i| {
        let xi = x.get(i);
        let yi = y.get(i);
        xi.symmetric_difference(yi).len() == 2 || xi.intersection(yi).len() == 2
    });
    let sparse_ok = is_l_sparse(x, l)? && is_l_sparse(y, l)?;

    let probe = (l / 2 - 1) as u64;
    let cost = binomial(m as u64, probe);
    if cost > budget() {
        return Err(Error::Budget(format!(
            "small-set coverage check needs {cost} subsets (budget {})",
            budget()
        )));
    }
    let mut small_sets_covered = true;
    'outer: for combo in (0..m).combinations(probe as usize) {
        let s = ItemSet::from_indices(m, &combo);
        for coll in [x, y] {
            if !coll.sets().iter().any(|member| s.is_subset(member)) {
                small_sets_covered = false;
                break 'outer;
            }
        }
    }

    Ok(CompatibilityReport { sizes_ok, promise_ok, sparse_ok, small_sets_covered })
}

/// Sample an `l`-compatible pair of collections with the given far indices.
///
/// Near indices get `Y_i` one swap away from `X_i`; far indices get
/// `Y_i = (M minus X_i) + two elements of X_i`, which forces
/// `|X_i intersect Y_i| = 2` and `X_i union Y_i = M`.
pub fn sample_compatible_pair(
    m: u32,
    k: usize,
    l: u32,
    far_indices: &[usize],
    rng: &mut Rng,
) -> Result<Sampled<(SetCollection, SetCollection)>> {
    check_l(l)?;
    if far_indices.iter().any(|&i| i >= k) {
        return Err(Error::Parameter("far index out of range".into()));
    }
    for attempt in 1..=DEFAULT_ATTEMPT_CAP {
        let xs: Vec<ItemSet> = (0..k)
            .map(|_| sample_halfset(m, rng))
            .collect::<Result<_>>()?;
        let ys: Vec<ItemSet> = xs
            .iter()
            .enumerate()
            .map(|(i, xi)| {
                if far_indices.contains(&i) {
                    let keep = xi.indices();
                    let a = keep[rng.gen_range(0..keep.len())];
                    let b = loop {
                        let c = keep[rng.gen_range(0..keep.len())];
                        if c != a {
                            break c;
                        }
                    };
                    let mut y = xi.complement();
                    y.insert(a);
                    y.insert(b);
                    y
                } else {
                    swap_one(xi, rng)
                }
            })
            .collect();
        let x = SetCollection::new(m, xs);
        let y = SetCollection::new(m, ys);
        if check_l_compatible(&x, &y, l)?.all() {
            return Ok(Sampled { value: (x, y), attempts: attempt });
        }
    }
    Err(Error::SamplingFailure {
        attempts: DEFAULT_ATTEMPT_CAP,
        context: format!("no l-compatible pair at m={m}, k={k}, l={l}"),
    })
}

/// Both sets have size `m/2 + 1` and differ by exactly one swap.
pub fn is_link(x: &ItemSet, y: &ItemSet) -> bool {
    assert_eq!(x.m(), y.m());
    let half = x.m() / 2 + 1;
    x.m() % 2 == 0
        && x.len() == half
        && y.len() == half
        && x.symmetric_difference(y).len() == 2
}

/// A sequence of `n = m/2` sets forming consecutive links whose endpoints
/// intersect in exactly two items.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Chain {
    pub sets: Vec<ItemSet>,
}

/// Consecutive pairs are links and `|T_1 intersect T_n| = 2`.
pub fn is_chain(candidate: &[ItemSet]) -> bool {
    if candidate.is_empty() {
        return false;
    }
    let m = candidate[0].m();
    if m % 2 != 0 || candidate.len() != (m / 2) as usize {
        return false;
    }
    for w in candidate.windows(2) {
        if !is_link(&w[0], &w[1]) {
            return false;
        }
    }
    candidate[0]
        .intersection(candidate.last().unwrap())
        .len()
        == 2
}

/// Chain/link counts: closed-form values, plus an explicit enumeration
/// cross-check for small ground sets.
#[derive(Clone, Debug)]
pub struct ChainLinkCounts {
    pub chains: BigUint,
    pub links: BigUint,
    pub chains_per_link: BigUint,
    /// `(chains, links, chains_per_link)` from explicit enumeration,
    /// populated when `m <= 8`.
    pub enumerated: Option<(u64, u64, u64)>,
}

fn factorial(n: u64) -> BigUint {
    (1..=n).map(BigUint::from).product::<BigUint>().max(BigUint::from(1u32))
}

fn big_binomial(n: u64, k: u64) -> BigUint {
    if k > n {
        return BigUint::from(0u32);
    }
    factorial(n) / (factorial(k) * factorial(n - k))
}

/// Build the chain determined by an ordering of the ground set: the first two
/// items persist in every set, the next `n - 1` items are added one per step,
/// and the last `n - 1` items are removed one per step.
fn chain_from_ordering(order: &[u32], m: u32) -> Vec<ItemSet> {
    let n = (m / 2) as usize;
    let mut t1 = ItemSet::empty(m);
    t1.insert(order[0]);
    t1.insert(order[1]);
    for &removed_later in &order[n + 1..] {
        t1.insert(removed_later);
    }
    let mut chain = vec![t1];
    for step in 1..n {
        let mut next = *chain.last().unwrap();
        next.insert(order[1 + step]); // added item
        next.remove(order[n + step]); // removed item
        chain.push(next);
    }
    chain
}

/// Index pairs `(i, j)` such that `(T_i, T_j)` is a structural link of a
/// chain of length `n` (0-based; the first coordinate has even index).
fn structural_link_indices(n: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for i in (0..n).step_by(2) {
        if i + 1 < n {
            out.push((i, i + 1));
        }
        if i >= 1 {
            out.push((i, i - 1));
        }
    }
    out
}

pub fn count_chains_links(m: u32) -> Result<ChainLinkCounts> {
    if m < 4 || m % 2 != 0 {
        return Err(Error::Parameter(format!("m must be even and >= 4, got {m}")));
    }
    let n = (m / 2) as u64;
    let chains = factorial(m as u64) / BigUint::from(2u32);
    let links = big_binomial(m as u64, n + 1) * BigUint::from(n - 1) * BigUint::from(n + 1);
    let chains_per_link =
        factorial(m as u64) / (BigUint::from(2u32) * big_binomial(m as u64, n + 1) * BigUint::from(n + 1));

    let enumerated = if m <= 8 {
        Some(enumerate_chains_links(m)?)
    } else {
        None
    };

    if let Some((ec, el, ecpl)) = enumerated {
        if BigUint::from(ec) != chains
            || BigUint::from(el) != links
            || BigUint::from(ecpl) != chains_per_link
        {
            return Err(Error::Numerical(format!(
                "enumeration disagrees with formulas at m={m}: {ec}/{chains} chains, {el}/{links} links, {ecpl}/{chains_per_link} per link"
            )));
        }
    }

    Ok(ChainLinkCounts { chains, links, chains_per_link, enumerated })
}

fn enumerate_chains_links(m: u32) -> Result<(u64, u64, u64)> {
    use std::collections::{HashMap, HashSet};
    let n = (m / 2) as usize;

    let mut chains: HashSet<Vec<u128>> = HashSet::new();
    let mut per_link: HashMap<(u128, u128), u64> = HashMap::new();
    for order in (0..m).permutations(m as usize) {
        let chain = chain_from_ordering(&order, m);
        debug_assert!(is_chain(&chain));
        if chains.insert(chain.iter().map(|s| s.bits()).collect()) {
            for (i, j) in structural_link_indices(n) {
                *per_link.entry((chain[i].bits(), chain[j].bits())).or_insert(0) += 1;
            }
        }
    }

    let mut links = 0u64;
    let half = m / 2 + 1;
    for xs in (0..m).combinations(half as usize) {
        let x = ItemSet::from_indices(m, &xs);
        for ys in (0..m).combinations(half as usize) {
            let y = ItemSet::from_indices(m, &ys);
            if is_link(&x, &y) {
                links += 1;
            }
        }
    }

    let counts: HashSet<u64> = per_link.values().copied().collect();
    if counts.len() != 1 || per_link.len() as u64 != links {
        return Err(Error::Numerical(format!(
            "structural-link symmetry broken at m={m}: {} distinct counts over {} links",
            counts.len(),
            per_link.len()
        )));
    }
    Ok((chains.len() as u64, links, counts.into_iter().next().unwrap()))
}
