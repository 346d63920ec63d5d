//! Two-bidder combinatorial-auction laboratory.
//!
//! Everything here works at "desk scale": ground sets small enough that
//! exhaustive enumeration (2^m allocations, all index subsets of a set
//! collection) is feasible, so every probabilistic or LP-based computation
//! can be cross-checked against a brute-force oracle.
//!
//! Module map:
//! - [`sets`]: bit-set ground-set algebra, sparsity/independence/compatibility
//!   predicates, samplers, link/chain combinatorics.
//! - [`valuations`]: cover valuations, explicit tables, MPH representations,
//!   demand queries and property verifiers.
//! - [`welfare`]: exact two-bidder welfare maximization and baseline protocols.
//! - [`configlp`]: the configuration LP, solved exactly and by demand-oracle
//!   column generation.
//! - [`rounding`]: oblivious rounding schemes with exact-expectation and
//!   Monte-Carlo evaluators.
//! - [`hardness`]: builders and verifiers for the hard instance families.

pub mod configlp;
pub mod hardness;
pub mod rounding;
pub mod sets;
pub mod simplex;
pub mod valuations;
pub mod welfare;

use thiserror::Error;

/// Exact rational scalar used by all valuation oracles.
pub type Q = num::BigRational;

/// Convert a small integer to a rational.
pub fn q(n: i64) -> Q {
    Q::from_integer(n.into())
}

/// Convert an `f64` to the exact rational it represents.
///
/// Every finite `f64` is a dyadic rational, so this conversion is lossless;
/// it is how floating-point LP output enters exact verification passes.
pub fn q_from_f64(x: f64) -> Q {
    Q::from_float(x).expect("finite float")
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("enumeration budget exceeded: {0}")]
    Budget(String),
    #[error("sampling failed after {attempts} attempts: {context}")]
    SamplingFailure { attempts: u64, context: String },
    #[error("construction error: {0}")]
    Construction(String),
    #[error("solver did not converge: {0}")]
    Convergence(String),
    #[error("numerical error: {0}")]
    Numerical(String),
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("schema error: {0}")]
    Schema(String),
}

pub type Result<T> = std::result::Result<T, Error>;

/// Enumeration budget for exhaustive checks.
///
/// Overridable through the `AUCTIONLAB_BUDGET` environment variable.
pub fn budget() -> u64 {
    std::env::var("AUCTIONLAB_BUDGET")
        .ok()
        .and_then(|s| s.parse().ok())
        .unwrap_or(10_000_000)
}

/// The deterministic PRNG used by every sampler.
///
/// ChaCha8 keyed by a 64-bit seed: identical seed, identical sample sequence,
/// on every platform.
pub type Rng = rand_chacha::ChaCha8Rng;

/// Build the canonical PRNG from a 64-bit seed.
pub fn seeded(seed: u64) -> Rng {
    use rand::SeedableRng;
    Rng::seed_from_u64(seed)
}

/// Derive a per-instance seed from a base seed and an index (splitmix64 step).
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed
        .wrapping_add(0x9e3779b97f4a7c15u64.wrapping_mul(index.wrapping_add(1)));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}
