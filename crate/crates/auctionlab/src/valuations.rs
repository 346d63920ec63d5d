//! Valuation oracles.
//!
//! Three concrete forms share the [`Valuation`] interface: cover valuations
//! built from a sparse set collection, explicit 2^m tables, and maximum-over-
//! positive-hypergraph (MPH) representations. All values are exact rationals;
//! no floating point enters any oracle. The module also provides demand
//! queries, the monotonicity/subadditivity verifiers, MPH-level bounds, and
//! the half-ground-rank MPH construction for monotone subadditive inputs.

use crate::sets::{is_l_sparse, ItemSet, Sampled, SetCollection, DEFAULT_ATTEMPT_CAP};
use crate::{budget, q, Error, Q, Result, Rng};
use num::{BigInt, Zero};
use rand::Rng as _;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::str::FromStr;
use std::sync::Mutex;

/// Common value-query interface.
pub trait Valuation {
    fn m(&self) -> u32;
    /// Exact value of a bundle; panics on a ground-set mismatch.
    fn value(&self, x: &ItemSet) -> Q;
}

fn check_ground(v: &dyn Valuation, x: &ItemSet) {
    assert_eq!(v.m(), x.m(), "bundle over a different ground set");
}

const CACHE_CAP: usize = 1 << 20;

// ---------------------------------------------------------------------------
// Cover number and cover valuations
// ---------------------------------------------------------------------------

/// Minimum number of members of `sets` whose union contains `x`, if that
/// minimum is at most `bound`. Branch and bound on the lowest uncovered item.
fn sigma_bounded(sets: &[u128], x: u128, bound: u32) -> Option<u32> {
    if x == 0 {
        return Some(0);
    }
    if bound == 0 {
        return None;
    }
    let item = x.trailing_zeros();
    let mut best: Option<u32> = None;
    for &s in sets {
        if s & (1u128 << item) == 0 {
            continue;
        }
        // Only explore strictly better covers than the incumbent.
        let limit = best.map_or(bound, |b| b - 1);
        if limit == 0 {
            break;
        }
        if let Some(c) = sigma_bounded(sets, x & !s, limit - 1) {
            best = Some(c + 1);
            if c == 0 || best == Some(1) {
                break;
            }
        }
    }
    best
}

/// Cover number of `x` with the uncoverable fallback `max(l, k)`.
pub fn cover_number(collection: &SetCollection, l: u32, x: &ItemSet) -> u32 {
    assert_eq!(collection.m(), x.m(), "bundle over a different ground set");
    let k = collection.k() as u32;
    if !x.is_subset(&collection.coverage()) {
        return l.max(k);
    }
    let sets: Vec<u128> = collection.sets().iter().map(|s| s.bits()).collect();
    sigma_bounded(&sets, x.bits(), k).expect("covered set must have a cover of size <= k")
}

/// The cover valuation: integer-valued, range `[0, l]`, built from an
/// `l`-sparse collection.
pub struct CoverValuation {
    collection: SetCollection,
    l: u32,
    set_bits: Vec<u128>,
    cache: Mutex<HashMap<u128, u32>>,
}

impl CoverValuation {
    /// Validates sparsity up front: without it the two defining branches can
    /// both fire on the same bundle.
    pub fn new(collection: SetCollection, l: u32) -> Result<Self> {
        if collection.k() == 0 {
            return Err(Error::Construction("empty set collection".into()));
        }
        if !is_l_sparse(&collection, l)? {
            return Err(Error::Construction(format!(
                "collection is not {l}-sparse; the valuation would be doubly defined"
            )));
        }
        let set_bits = collection.sets().iter().map(|s| s.bits()).collect();
        Ok(CoverValuation { collection, l, set_bits, cache: Mutex::new(HashMap::new()) })
    }

    pub fn l(&self) -> u32 {
        self.l
    }

    pub fn collection(&self) -> &SetCollection {
        &self.collection
    }

    fn sigma_below_half(&self, bits: u128) -> Option<u32> {
        let covered = self
            .collection
            .coverage()
            .bits();
        if bits & !covered != 0 {
            return None; // fallback value max(l, k) >= l/2 in all cases here
        }
        sigma_bounded(&self.set_bits, bits, self.l / 2 - 1)
    }

    /// Integer value of a bundle.
    pub fn f(&self, x: &ItemSet) -> u32 {
        assert_eq!(self.m(), x.m(), "bundle over a different ground set");
        if let Some(&v) = self.cache.lock().unwrap().get(&x.bits()) {
            return v;
        }
        let direct = self.sigma_below_half(x.bits());
        let co = self.sigma_below_half(x.complement().bits());
        assert!(
            !(direct.is_some() && co.is_some()),
            "both branches fired; sparsity validation should have prevented this"
        );
        let v = match (direct, co) {
            (Some(s), None) => s,
            (None, Some(s)) => self.l - s,
            (None, None) => self.l / 2,
            (Some(_), Some(_)) => unreachable!(),
        };
        let mut cache = self.cache.lock().unwrap();
        if cache.len() >= CACHE_CAP {
            cache.clear();
        }
        cache.insert(x.bits(), v);
        v
    }

    /// Full value table, item-mask indexed. Requires `2^m` within budget.
    pub fn f_table(&self) -> Result<Vec<u32>> {
        let m = self.m();
        if m > 25 || (1u64 << m) > budget() {
            return Err(Error::Budget(format!("2^{m} table exceeds budget {}", budget())));
        }
        Ok((0u128..(1 << m)).map(|bits| self.f(&ItemSet::from_bits(m, bits))).collect())
    }
}

impl Valuation for CoverValuation {
    fn m(&self) -> u32 {
        self.collection.m()
    }

    fn value(&self, x: &ItemSet) -> Q {
        q(self.f(x) as i64)
    }
}

// ---------------------------------------------------------------------------
// Explicit tables and MPH representations
// ---------------------------------------------------------------------------

/// A valuation given by its full 2^m table, item-mask indexed.
#[derive(Clone, Debug, PartialEq)]
pub struct ExplicitValuation {
    m: u32,
    table: Vec<Q>,
}

impl ExplicitValuation {
    pub fn new(m: u32, table: Vec<Q>) -> Result<Self> {
        if m > 25 || table.len() != 1usize << m {
            return Err(Error::Construction(format!(
                "table length {} does not match 2^{m}",
                table.len()
            )));
        }
        if !table[0].is_zero() {
            return Err(Error::Construction("v(empty) must be 0".into()));
        }
        if table.iter().any(|v| v < &Q::zero()) {
            return Err(Error::Construction("negative value in table".into()));
        }
        Ok(ExplicitValuation { m, table })
    }

    pub fn from_valuation(v: &dyn Valuation) -> Result<Self> {
        let m = v.m();
        if m > 20 {
            return Err(Error::Budget(format!("refusing 2^{m} table")));
        }
        let table = (0u128..(1 << m))
            .map(|bits| v.value(&ItemSet::from_bits(m, bits)))
            .collect();
        ExplicitValuation::new(m, table)
    }

    pub fn table(&self) -> &[Q] {
        &self.table
    }
}

impl Valuation for ExplicitValuation {
    fn m(&self) -> u32 {
        self.m
    }

    fn value(&self, x: &ItemSet) -> Q {
        check_ground(self, x);
        self.table[x.bits() as usize].clone()
    }
}

/// One positive-hypergraph clause: non-negative weights on edges of bounded
/// size. The clause's value at `X` is the total weight of edges inside `X`.
pub type Clause = Vec<(ItemSet, Q)>;

/// Maximum over positive-hypergraph clauses of rank `k`.
#[derive(Clone, Debug, PartialEq)]
pub struct MphRepresentation {
    m: u32,
    k: u32,
    clauses: Vec<Clause>,
}

impl MphRepresentation {
    pub fn new(m: u32, k: u32, clauses: Vec<Clause>) -> Result<Self> {
        if clauses.is_empty() {
            return Err(Error::Construction("at least one clause required".into()));
        }
        for clause in &clauses {
            for (edge, w) in clause {
                if edge.m() != m {
                    return Err(Error::Construction("edge over a different ground set".into()));
                }
                if edge.is_empty() {
                    return Err(Error::Construction("empty edge not allowed".into()));
                }
                if edge.len() > k {
                    return Err(Error::Construction(format!(
                        "edge of size {} exceeds rank {k}",
                        edge.len()
                    )));
                }
                if w < &Q::zero() {
                    return Err(Error::Construction("negative edge weight".into()));
                }
            }
        }
        Ok(MphRepresentation { m, k, clauses })
    }

    pub fn rank(&self) -> u32 {
        self.k
    }

    pub fn clauses(&self) -> &[Clause] {
        &self.clauses
    }

    fn clause_value(clause: &Clause, x: &ItemSet) -> Q {
        clause
            .iter()
            .filter(|(edge, _)| edge.is_subset(x))
            .fold(Q::zero(), |acc, (_, w)| acc + w)
    }
}

impl Valuation for MphRepresentation {
    fn m(&self) -> u32 {
        self.m
    }

    fn value(&self, x: &ItemSet) -> Q {
        check_ground(self, x);
        self.clauses
            .iter()
            .map(|c| Self::clause_value(c, x))
            .max()
            .expect("at least one clause")
    }
}

// ---------------------------------------------------------------------------
// Prices and demand queries
// ---------------------------------------------------------------------------

/// Non-negative per-item price vector.
#[derive(Clone, Debug, PartialEq)]
pub struct Prices(Vec<Q>);

impl Prices {
    pub fn new(p: Vec<Q>) -> Result<Self> {
        if p.iter().any(|x| x < &Q::zero()) {
            return Err(Error::Parameter("negative price".into()));
        }
        Ok(Prices(p))
    }

    pub fn zero(m: u32) -> Self {
        Prices(vec![Q::zero(); m as usize])
    }

    pub fn m(&self) -> u32 {
        self.0.len() as u32
    }

    pub fn get(&self, item: u32) -> &Q {
        &self.0[item as usize]
    }

    /// Total price of a bundle.
    pub fn total(&self, x: &ItemSet) -> Q {
        x.iter().fold(Q::zero(), |acc, j| acc + &self.0[j as usize])
    }
}

/// Exhaustive utility maximization: the bundle maximizing `v(S) - p(S)`,
/// ties broken toward the lexicographically smallest bit pattern (ascending
/// mask scan with strict improvement).
pub fn demand_query(v: &dyn Valuation, p: &Prices) -> Result<ItemSet> {
    let m = v.m();
    if p.m() != m {
        return Err(Error::Parameter("price vector length mismatch".into()));
    }
    if m > 20 {
        return Err(Error::Budget(format!("demand query over 2^{m} bundles refused")));
    }
    let mut best_set = ItemSet::empty(m);
    let mut best_util = v.value(&best_set); // v(empty) - 0
    for bits in 1u128..(1 << m) {
        let s = ItemSet::from_bits(m, bits);
        let util = v.value(&s) - p.total(&s);
        if util > best_util {
            best_util = util;
            best_set = s;
        }
    }
    Ok(best_set)
}

// ---------------------------------------------------------------------------
// Property verifiers
// ---------------------------------------------------------------------------

/// Outcome of the exhaustive monotonicity + subadditivity scan.
#[derive(Clone, Debug, PartialEq)]
pub struct MonoSubaddVerdict {
    pub monotone: bool,
    pub subadditive: bool,
    /// First `(X, Y)` with `v(X union Y) < v(X)`, if any.
    pub monotone_counterexample: Option<(ItemSet, ItemSet)>,
    /// First `(X, Y)` with `v(X union Y) > v(X) + v(Y)`, if any.
    pub subadditive_counterexample: Option<(ItemSet, ItemSet)>,
}

impl MonoSubaddVerdict {
    pub fn ok(&self) -> bool {
        self.monotone && self.subadditive
    }
}

/// Scan all `4^m` pairs of a full value table. Generic over the scalar so
/// integer-valued oracles can use machine integers instead of big rationals.
pub fn table_monotone_subadditive<T>(m: u32, table: &[T]) -> Result<MonoSubaddVerdict>
where
    T: Clone + Ord + std::ops::Add<Output = T>,
{
    if table.len() != 1usize << m {
        return Err(Error::Parameter("table length mismatch".into()));
    }
    if (1u64 << (2 * m)) > budget() {
        return Err(Error::Budget(format!("4^{m} pair scan exceeds budget {}", budget())));
    }
    let mut verdict = MonoSubaddVerdict {
        monotone: true,
        subadditive: true,
        monotone_counterexample: None,
        subadditive_counterexample: None,
    };
    let n = 1usize << m;
    for x in 0..n {
        for y in 0..n {
            let u = x | y;
            if verdict.monotone && table[u] < table[x] {
                verdict.monotone = false;
                verdict.monotone_counterexample =
                    Some((ItemSet::from_bits(m, x as u128), ItemSet::from_bits(m, y as u128)));
            }
            if verdict.subadditive && table[u].clone() > table[x].clone() + table[y].clone() {
                verdict.subadditive = false;
                verdict.subadditive_counterexample =
                    Some((ItemSet::from_bits(m, x as u128), ItemSet::from_bits(m, y as u128)));
            }
            if !verdict.monotone && !verdict.subadditive {
                return Ok(verdict);
            }
        }
    }
    Ok(verdict)
}

/// Exhaustive monotonicity and subadditivity check for any valuation.
pub fn check_monotone_subadditive(v: &dyn Valuation) -> Result<MonoSubaddVerdict> {
    let m = v.m();
    let table: Vec<Q> = (0u128..(1 << m))
        .map(|bits| v.value(&ItemSet::from_bits(m, bits)))
        .collect();
    table_monotone_subadditive(m, &table)
}

impl CoverValuation {
    /// Integer fast path of [`check_monotone_subadditive`].
    pub fn check_monotone_subadditive_fast(&self) -> Result<MonoSubaddVerdict> {
        table_monotone_subadditive(self.m(), &self.f_table()?)
    }
}

fn sample_bits(m: u32, rng: &mut Rng) -> u128 {
    let mask = if m == 128 { u128::MAX } else { (1u128 << m) - 1 };
    (rng.gen::<u128>()) & mask
}

/// `f(X) + f(complement of X) = l` for all checked bundles (exhaustive for
/// `m <= 20`, else 10^4 sampled bundles).
pub fn complement_identity_check(v: &CoverValuation, rng: &mut Rng) -> bool {
    let m = v.m();
    let probe = |bits: u128| {
        let x = ItemSet::from_bits(m, bits);
        v.f(&x) + v.f(&x.complement()) == v.l()
    };
    if m <= 20 {
        (0u128..(1 << m)).all(probe)
    } else {
        (0..10_000).all(|_| probe(sample_bits(m, rng)))
    }
}

/// `f(X) <= cover_number(X)` for all checked bundles.
pub fn f_le_sigma_check(v: &CoverValuation, rng: &mut Rng) -> bool {
    let m = v.m();
    let probe = |bits: u128| {
        let x = ItemSet::from_bits(m, bits);
        v.f(&x) <= cover_number(v.collection(), v.l(), &x)
    };
    if m <= 20 {
        (0u128..(1 << m)).all(probe)
    } else {
        (0..10_000).all(|_| probe(sample_bits(m, rng)))
    }
}

// ---------------------------------------------------------------------------
// MPH level machinery
// ---------------------------------------------------------------------------

/// Marginal-ratio lower bound on the MPH level: `v` cannot be MPH-k for any
/// `k` strictly below the returned value.
pub fn mph_level_lower_bound(v: &dyn Valuation) -> Result<Q> {
    let m = v.m();
    let full = ItemSet::full(m);
    let v_m = v.value(&full);
    if v_m.is_zero() {
        return Err(Error::Degenerate("v(M) = 0: bound undefined".into()));
    }
    let mut marginals = Q::zero();
    for j in 0..m {
        let mut without = full;
        without.remove(j);
        marginals += v_m.clone() - v.value(&without);
    }
    Ok(marginals / v_m)
}

/// Represent a monotone subadditive valuation exactly as an MPH function of
/// rank `ceil(m/2)`: one two-edge clause per bundle `S`, with the first edge
/// the lowest-index subset of `S` of size `min(|S|, ceil(m/2))`.
pub fn build_mph_halfm(v: &dyn Valuation) -> Result<MphRepresentation> {
    let m = v.m();
    if m > 10 {
        return Err(Error::Budget(format!("refusing 2^{m}-clause construction")));
    }
    let verdict = check_monotone_subadditive(v)?;
    if !verdict.ok() {
        return Err(Error::Construction(format!(
            "input is not monotone subadditive: {verdict:?}"
        )));
    }
    let rank = (m + 1) / 2;
    let mut clauses = Vec::new();
    for bits in 1u128..(1 << m) {
        let s = ItemSet::from_bits(m, bits);
        // Lowest-index |S| choose min(|S|, rank) prefix of S.
        let take = s.len().min(rank);
        let mut head = ItemSet::empty(m);
        for j in s.iter().take(take as usize) {
            head.insert(j);
        }
        let tail = s.difference(&head);
        let w_head = v.value(&head);
        let w_tail = v.value(&s) - v.value(&head);
        if w_tail < Q::zero() {
            // Monotonicity already rules this out; keep the guard explicit.
            return Err(Error::Construction("negative residual weight".into()));
        }
        let mut clause: Clause = Vec::new();
        if !head.is_empty() && !w_head.is_zero() {
            clause.push((head, w_head));
        }
        if !tail.is_empty() && !w_tail.is_zero() {
            clause.push((tail, w_tail));
        }
        clauses.push(clause);
    }
    let rep = MphRepresentation::new(m, rank.max(1), clauses)?;
    // The construction is only correct if it reproduces v pointwise.
    for bits in 0u128..(1 << m) {
        let x = ItemSet::from_bits(m, bits);
        if rep.value(&x) != v.value(&x) {
            return Err(Error::Construction(format!(
                "representation disagrees with input at {x:?}"
            )));
        }
    }
    Ok(rep)
}

/// `w <= v <= beta * w` pointwise.
pub fn pointwise_beta_check(v: &dyn Valuation, w: &dyn Valuation, beta: &Q) -> Result<bool> {
    let m = v.m();
    if w.m() != m {
        return Err(Error::Parameter("ground-set mismatch".into()));
    }
    if m > 16 {
        return Err(Error::Budget(format!("refusing 2^{m} pointwise scan")));
    }
    for bits in 0u128..(1 << m) {
        let x = ItemSet::from_bits(m, bits);
        let vw = w.value(&x);
        let vv = v.value(&x);
        if vw > vv || beta.clone() * vw < vv {
            return Ok(false);
        }
    }
    Ok(true)
}

// ---------------------------------------------------------------------------
// Instance generators
// ---------------------------------------------------------------------------

/// Rejection-sample a subadditive MPH-2 valuation: an additive floor clause
/// plus clauses mixing singleton and pair edges, accepted only after an
/// exhaustive subadditivity check on integer tables.
pub fn sample_subadditive_mph2(m: u32, rng: &mut Rng) -> Result<Sampled<MphRepresentation>> {
    if m > 10 {
        return Err(Error::Budget(format!("exhaustive rejection check refused at m={m}")));
    }
    for attempt in 1..=DEFAULT_ATTEMPT_CAP {
        // Integer weights so the rejection check runs on machine integers.
        let floor: Vec<u64> = (0..m).map(|_| rng.gen_range(1..=3)).collect();
        let extra_clauses = rng.gen_range(1..=2);
        let mut int_clauses: Vec<Vec<(u128, u64)>> = Vec::new();
        int_clauses.push(
            (0..m).map(|j| (1u128 << j, floor[j as usize])).collect(),
        );
        for _ in 0..extra_clauses {
            let mut clause: Vec<(u128, u64)> = (0..m)
                .filter_map(|j| {
                    let w = rng.gen_range(0..=2);
                    (w > 0).then_some((1u128 << j, w))
                })
                .collect();
            for _ in 0..(m / 2) {
                let a = rng.gen_range(0..m);
                let b = rng.gen_range(0..m);
                if a != b {
                    clause.push(((1u128 << a) | (1u128 << b), rng.gen_range(1..=2)));
                }
            }
            if !clause.is_empty() {
                int_clauses.push(clause);
            }
        }
        let table: Vec<u64> = (0u128..(1 << m))
            .map(|mask| {
                int_clauses
                    .iter()
                    .map(|c| {
                        c.iter()
                            .filter(|(e, _)| e & !mask == 0)
                            .map(|(_, w)| w)
                            .sum::<u64>()
                    })
                    .max()
                    .unwrap()
            })
            .collect();
        if table_monotone_subadditive(m, &table)?.ok() {
            let clauses: Vec<Clause> = int_clauses
                .iter()
                .map(|c| {
                    c.iter()
                        .map(|&(e, w)| (ItemSet::from_bits(m, e), q(w as i64)))
                        .collect()
                })
                .collect();
            let rep = MphRepresentation::new(m, 2, clauses)?;
            return Ok(Sampled { value: rep, attempts: attempt });
        }
    }
    Err(Error::SamplingFailure {
        attempts: DEFAULT_ATTEMPT_CAP,
        context: format!("no subadditive MPH-2 valuation found at m={m}"),
    })
}

/// Random monotone subadditive valuation: a budget-capped additive function
/// `min(sum of item weights, cap)`, which is monotone and subadditive for any
/// weights and cap.
pub fn sample_monotone_subadditive(m: u32, rng: &mut Rng) -> Result<ExplicitValuation> {
    if m > 16 {
        return Err(Error::Budget(format!("refusing 2^{m} table at m={m}")));
    }
    let weights: Vec<i64> = (0..m).map(|_| rng.gen_range(1..=5)).collect();
    let total: i64 = weights.iter().sum();
    let max_w = *weights.iter().max().unwrap();
    let cap = rng.gen_range(max_w..=total);
    let table = (0u128..(1 << m))
        .map(|mask| {
            let s: i64 = (0..m)
                .filter(|&j| mask & (1 << j) != 0)
                .map(|j| weights[j as usize])
                .sum();
            q(s.min(cap))
        })
        .collect();
    ExplicitValuation::new(m, table)
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

fn q_to_string(x: &Q) -> String {
    if x.denom() == &BigInt::from(1) {
        x.numer().to_string()
    } else {
        format!("{}/{}", x.numer(), x.denom())
    }
}

fn q_parse(s: &str) -> Result<Q> {
    let parse_int = |t: &str| {
        BigInt::from_str(t.trim()).map_err(|e| Error::Schema(format!("bad rational {s:?}: {e}")))
    };
    match s.split_once('/') {
        Some((n, d)) => {
            let denom = parse_int(d)?;
            if denom.is_zero() {
                return Err(Error::Schema(format!("zero denominator in {s:?}")));
            }
            Ok(Q::new(parse_int(n)?, denom))
        }
        None => Ok(Q::from_integer(parse_int(s)?)),
    }
}

/// Wire form of a rational: a plain integer or a `"num/den"` string.
#[derive(Serialize, Deserialize)]
#[serde(untagged)]
pub enum QWire {
    Int(i64),
    Str(String),
}

impl QWire {
    pub(crate) fn to_q(&self) -> Result<Q> {
        match self {
            QWire::Int(n) => Ok(q(*n)),
            QWire::Str(s) => q_parse(s),
        }
    }

    pub(crate) fn of(x: &Q) -> QWire {
        QWire::Str(q_to_string(x))
    }
}

/// Any concrete valuation, in its JSON wire shape.
///
/// Schema: `{"kind":"cover","l":int,"collection":{...}}` |
/// `{"kind":"explicit","m":int,"values":[rational...]}` |
/// `{"kind":"mph","m":int,"k":int,"clauses":[{"edges":[[[items],rational]...]}]}`.
/// Rationals are integers or `"num/den"` strings.
#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ValuationWire {
    Cover {
        l: u32,
        collection: SetCollection,
    },
    Explicit {
        m: u32,
        values: Vec<QWire>,
    },
    Mph {
        m: u32,
        k: u32,
        clauses: Vec<ClauseWire>,
    },
}

#[derive(Serialize, Deserialize)]
pub struct ClauseWire {
    edges: Vec<(Vec<u32>, QWire)>,
}

/// Deserialized valuation of any concrete form.
pub enum AnyValuation {
    Cover(CoverValuation),
    Explicit(ExplicitValuation),
    Mph(MphRepresentation),
}

impl Valuation for AnyValuation {
    fn m(&self) -> u32 {
        match self {
            AnyValuation::Cover(v) => v.m(),
            AnyValuation::Explicit(v) => v.m(),
            AnyValuation::Mph(v) => v.m(),
        }
    }

    fn value(&self, x: &ItemSet) -> Q {
        match self {
            AnyValuation::Cover(v) => v.value(x),
            AnyValuation::Explicit(v) => v.value(x),
            AnyValuation::Mph(v) => v.value(x),
        }
    }
}

impl AnyValuation {
    pub fn from_wire(wire: &ValuationWire) -> Result<Self> {
        match wire {
            ValuationWire::Cover { l, collection } => {
                Ok(AnyValuation::Cover(CoverValuation::new(collection.clone(), *l)?))
            }
            ValuationWire::Explicit { m, values } => {
                let table = values.iter().map(QWire::to_q).collect::<Result<_>>()?;
                Ok(AnyValuation::Explicit(ExplicitValuation::new(*m, table)?))
            }
            ValuationWire::Mph { m, k, clauses } => {
                let clauses = clauses
                    .iter()
                    .map(|c| {
                        c.edges
                            .iter()
                            .map(|(items, w)| Ok((ItemSet::from_indices(*m, items), w.to_q()?)))
                            .collect::<Result<Clause>>()
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok(AnyValuation::Mph(MphRepresentation::new(*m, *k, clauses)?))
            }
        }
    }

    pub fn to_wire(&self) -> ValuationWire {
        match self {
            AnyValuation::Cover(v) => ValuationWire::Cover {
                l: v.l(),
                collection: v.collection().clone(),
            },
            AnyValuation::Explicit(v) => ValuationWire::Explicit {
                m: v.m(),
                values: v.table().iter().map(QWire::of).collect(),
            },
            AnyValuation::Mph(v) => ValuationWire::Mph {
                m: v.m(),
                k: v.rank(),
                clauses: v
                    .clauses()
                    .iter()
                    .map(|c| ClauseWire {
                        edges: c
                            .iter()
                            .map(|(e, w)| (e.indices(), QWire::of(w)))
                            .collect(),
                    })
                    .collect(),
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeded;

    fn coll(m: u32, sets: &[&[u32]]) -> SetCollection {
        SetCollection::new(m, sets.iter().map(|s| ItemSet::from_indices(m, s)).collect())
    }

    /// Exhaustive cover oracle: try every subset of member indices.
    fn sigma_oracle(c: &SetCollection, l: u32, x: &ItemSet) -> u32 {
        let k = c.k();
        let mut best: Option<u32> = None;
        for mask in 0u32..(1 << k) {
            let mut union = ItemSet::empty(c.m());
            for i in 0..k {
                if mask & (1 << i) != 0 {
                    union = union.union(c.get(i));
                }
            }
            if x.is_subset(&union) {
                best = Some(best.map_or(mask.count_ones(), |b| b.min(mask.count_ones())));
            }
        }
        best.unwrap_or(l.max(k as u32))
    }

    #[test]
    fn cover_number_matches_oracle() {
        let c = coll(4, &[&[0, 1], &[2, 3], &[0, 2]]);
        for bits in 0u128..16 {
            let x = ItemSet::from_bits(4, bits);
            assert_eq!(cover_number(&c, 4, &x), sigma_oracle(&c, 4, &x), "at {x:?}");
        }
        assert_eq!(cover_number(&c, 4, &ItemSet::from_indices(4, &[0, 1, 2])), 2);
        assert_eq!(cover_number(&c, 4, &ItemSet::empty(4)), 0);
    }

    #[test]
    fn cover_number_fallback() {
        let c = coll(6, &[&[0, 1], &[2, 3]]);
        // Item 4 uncoverable: fallback max(l, k) = max(4, 2).
        assert_eq!(cover_number(&c, 4, &ItemSet::from_indices(6, &[4])), 4);
        assert_eq!(cover_number(&c, 6, &ItemSet::from_indices(6, &[4])), 6);
    }

    fn sample_cover(m: u32, l: u32, k: usize, seed: u64) -> CoverValuation {
        let mut rng = seeded(seed);
        loop {
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
            let c = SetCollection::new(m, sets);
            if let Ok(v) = CoverValuation::new(c, l) {
                return v;
            }
        }
    }

    #[test]
    fn construction_rejects_dense_collections() {
        let dense = coll(4, &[&[0, 1, 2, 3]]);
        assert!(matches!(CoverValuation::new(dense, 4), Err(Error::Construction(_))));
    }

    #[test]
    fn f_endpoints_and_members() {
        let c = coll(6, &[&[0, 1], &[2, 3]]);
        let v = CoverValuation::new(c, 4).unwrap();
        assert_eq!(v.f(&ItemSet::empty(6)), 0);
        assert_eq!(v.f(&ItemSet::full(6)), 4);
        // A member is covered by itself.
        assert_eq!(v.f(&ItemSet::from_indices(6, &[0, 1])), 1);
        assert_eq!(v.f(&ItemSet::from_indices(6, &[0, 1]).complement()), 3);
        // Item 4 has cover number 4 on both sides: middle branch.
        assert_eq!(v.f(&ItemSet::from_indices(6, &[4])), 2);
    }

    #[test]
    fn f_identities_hold_on_random_instances() {
        for seed in 0..20 {
            let v = sample_cover(8, 4, 4, seed);
            let mut rng = seeded(seed + 1000);
            assert!(complement_identity_check(&v, &mut rng));
            assert!(f_le_sigma_check(&v, &mut rng));
            assert!(v.check_monotone_subadditive_fast().unwrap().ok());
            // f(X) = sigma(X) whenever sigma(X) < l/2.
            for bits in 0u128..256 {
                let x = ItemSet::from_bits(8, bits);
                let s = cover_number(v.collection(), v.l(), &x);
                if s < v.l() / 2 {
                    assert_eq!(v.f(&x), s);
                }
            }
        }
    }

    #[test]
    fn sigma_is_monotone_subadditive() {
        let c = coll(6, &[&[0, 1], &[2, 3], &[1, 4], &[0, 5]]);
        let table: Vec<u32> = (0u128..64).map(|b| cover_number(&c, 4, &ItemSet::from_bits(6, b))).collect();
        assert!(table_monotone_subadditive(6, &table).unwrap().ok());
    }

    #[test]
    fn mph_evaluation() {
        // Two clauses: {{a,b}:1} and {{c,d}:1} over items a=0,b=1,c=2,d=3.
        let rep = MphRepresentation::new(
            4,
            2,
            vec![
                vec![(ItemSet::from_indices(4, &[0, 1]), q(1))],
                vec![(ItemSet::from_indices(4, &[2, 3]), q(1))],
            ],
        )
        .unwrap();
        assert_eq!(rep.value(&ItemSet::from_indices(4, &[1, 2, 3])), q(1));
        assert_eq!(rep.value(&ItemSet::from_indices(4, &[0, 2])), q(0));
        assert_eq!(rep.value(&ItemSet::full(4)), q(1));
        assert_eq!(rep.value(&ItemSet::empty(4)), q(0));
    }

    #[test]
    fn demand_query_matches_exhaustive_max() {
        let v = sample_cover(6, 4, 3, 9);
        let mut rng = seeded(77);
        for _ in 0..20 {
            let p = Prices::new((0..6).map(|_| q(rng.gen_range(0..3))).collect()).unwrap();
            let s = demand_query(&v, &p).unwrap();
            let got = v.value(&s) - p.total(&s);
            let best = (0u128..64)
                .map(|b| {
                    let x = ItemSet::from_bits(6, b);
                    v.value(&x) - p.total(&x)
                })
                .max()
                .unwrap();
            assert_eq!(got, best);
            // Tie-break: no smaller bit pattern achieves the same utility.
            for b in 0..s.bits() {
                let x = ItemSet::from_bits(6, b);
                assert!(v.value(&x) - p.total(&x) < got);
            }
        }
    }

    #[test]
    fn demand_query_extremes() {
        let v = sample_cover(6, 4, 3, 5);
        let zero = Prices::zero(6);
        let s = demand_query(&v, &zero).unwrap();
        assert_eq!(v.value(&s), v.value(&ItemSet::full(6)));
        let high = Prices::new(vec![q(100); 6]).unwrap();
        assert!(demand_query(&v, &high).unwrap().is_empty());
    }

    #[test]
    fn subadditivity_counterexample_detected() {
        // The 4-item two-clause valuation above: v({0,3}) = v({1,2}) = 0 but
        // v(M) = 1.
        let rep = MphRepresentation::new(
            4,
            2,
            vec![
                vec![(ItemSet::from_indices(4, &[0, 1]), q(1))],
                vec![(ItemSet::from_indices(4, &[2, 3]), q(1))],
            ],
        )
        .unwrap();
        let verdict = check_monotone_subadditive(&rep).unwrap();
        assert!(verdict.monotone);
        assert!(!verdict.subadditive);
        let (x, y) = verdict.subadditive_counterexample.unwrap();
        assert!(rep.value(&x.union(&y)) > rep.value(&x) + rep.value(&y));
    }

    #[test]
    fn mph_level_bounds() {
        // Additive: bound 1.
        let add = ExplicitValuation::new(
            2,
            vec![q(0), q(1), q(1), q(2)],
        )
        .unwrap();
        assert_eq!(mph_level_lower_bound(&add).unwrap(), q(1));

        // Unit demand: all marginals at M are 0.
        let unit = ExplicitValuation::new(2, vec![q(0), q(1), q(1), q(1)]).unwrap();
        assert_eq!(mph_level_lower_bound(&unit).unwrap(), q(0));

        // Cover valuations: bound at least m/l.
        for seed in 0..10 {
            let v = sample_cover(8, 4, 4, seed);
            assert!(mph_level_lower_bound(&v).unwrap() >= q(8) / q(4));
        }

        let zero = ExplicitValuation::new(1, vec![q(0), q(0)]).unwrap();
        assert!(matches!(mph_level_lower_bound(&zero), Err(Error::Degenerate(_))));
    }

    #[test]
    fn half_rank_construction_is_pointwise_exact() {
        let mut rng = seeded(31);
        for _ in 0..10 {
            let v = sample_monotone_subadditive(6, &mut rng).unwrap();
            let rep = build_mph_halfm(&v).unwrap();
            assert_eq!(rep.rank(), 3);
            for bits in 0u128..64 {
                let x = ItemSet::from_bits(6, bits);
                assert_eq!(rep.value(&x), v.value(&x));
            }
        }
        for seed in 0..5 {
            let v = sample_cover(6, 4, 3, seed);
            let rep = build_mph_halfm(&v).unwrap();
            for bits in 0u128..64 {
                let x = ItemSet::from_bits(6, bits);
                assert_eq!(rep.value(&x), v.value(&x));
            }
        }
    }

    #[test]
    fn half_rank_construction_rejects_non_subadditive() {
        let rep = MphRepresentation::new(
            4,
            2,
            vec![
                vec![(ItemSet::from_indices(4, &[0, 1]), q(1))],
                vec![(ItemSet::from_indices(4, &[2, 3]), q(1))],
            ],
        )
        .unwrap();
        assert!(matches!(build_mph_halfm(&rep), Err(Error::Construction(_))));
    }

    #[test]
    fn beta_check() {
        let v = sample_cover(6, 4, 3, 1);
        let table: Vec<Q> = (0u128..64)
            .map(|b| v.value(&ItemSet::from_bits(6, b)))
            .collect();
        let same = ExplicitValuation::new(6, table.clone()).unwrap();
        assert!(pointwise_beta_check(&v, &same, &q(1)).unwrap());
        let halved =
            ExplicitValuation::new(6, table.iter().map(|x| x / q(2)).collect()).unwrap();
        assert!(pointwise_beta_check(&v, &halved, &q(2)).unwrap());
        let zero = ExplicitValuation::new(6, vec![Q::zero(); 64]).unwrap();
        assert!(!pointwise_beta_check(&v, &zero, &q(1000)).unwrap());
    }

    #[test]
    fn mph2_sampler_produces_subadditive_rank2() {
        let mut rng = seeded(8);
        for _ in 0..5 {
            let rep = sample_subadditive_mph2(6, &mut rng).unwrap().value;
            assert_eq!(rep.rank(), 2);
            assert!(check_monotone_subadditive(&rep).unwrap().ok());
        }
    }

    #[test]
    fn valuation_json_roundtrip() {
        let v = sample_cover(6, 4, 3, 2);
        let any = AnyValuation::Cover(v);
        let json = serde_json::to_string(&any.to_wire()).unwrap();
        let back = AnyValuation::from_wire(&serde_json::from_str(&json).unwrap()).unwrap();
        for bits in 0u128..64 {
            let x = ItemSet::from_bits(6, bits);
            assert_eq!(any.value(&x), back.value(&x));
        }

        let mut rng = seeded(3);
        let rep = sample_subadditive_mph2(5, &mut rng).unwrap().value;
        let json = serde_json::to_string(&AnyValuation::Mph(rep.clone()).to_wire()).unwrap();
        let back = AnyValuation::from_wire(&serde_json::from_str(&json).unwrap()).unwrap();
        for bits in 0u128..32 {
            let x = ItemSet::from_bits(5, bits);
            assert_eq!(rep.value(&x), back.value(&x));
        }

        // Fractions survive the string encoding.
        let e = ExplicitValuation::new(1, vec![q(0), q(3) / q(2)]).unwrap();
        let json = serde_json::to_string(&AnyValuation::Explicit(e).to_wire()).unwrap();
        assert!(json.contains("3/2"));
        let back = AnyValuation::from_wire(&serde_json::from_str(&json).unwrap()).unwrap();
        assert_eq!(back.value(&ItemSet::from_indices(1, &[0])), q(3) / q(2));
    }

    #[test]
    fn corrupted_cover_wire_rejected() {
        let wire: ValuationWire =
            serde_json::from_str(r#"{"kind":"cover","l":4,"collection":{"m":4,"sets":[[0,1,2,3]]}}"#)
                .unwrap();
        assert!(matches!(AnyValuation::from_wire(&wire), Err(Error::Construction(_))));
    }
}
