//! Online submodular welfare allocation.
//!
//! `n` bidders hold non-negative submodular utilities over `m` items that
//! arrive one at a time. This crate provides:
//!
//! - value oracles with query accounting and the usual test families
//!   (explicit tables, coverage, cuts, priced coverage) in [`function`];
//! - matroids, contraction and dummy padding in [`matroid`];
//! - the randomized rank allocator for adversarial arrival order, together
//!   with its exact-expectation engine and per-iteration diagnostics, in
//!   [`online`];
//! - the smooth and original residual random greedy algorithms and the
//!   deterministic greedy for random arrival order in [`rrg`];
//! - the adaptive two-item construction that defeats deterministic online
//!   allocators in [`hardness`];
//! - brute-force optima, best extensions, the sampling-lemma checker and
//!   Monte Carlo statistics in [`verify`] and [`stats`].
//!
//! The crate is `no_std` and only needs `alloc`.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod error;
pub mod function;
pub mod hardness;
pub mod matroid;
pub mod online;
pub mod perm;
pub mod rrg;
pub mod set;
pub mod stats;
pub mod verify;
pub mod welfare;

pub use error::{Error, Result};
pub use function::{
    CoverageFunction, CutFunction, Oracle, PricedFunction, SetFunction, TableFunction, EPS,
};
pub use matroid::{Matroid, PartitionStructure};
pub use set::ItemSet;
pub use stats::{trial_rng, TrialRng, TrialStats};
pub use welfare::{Allocation, WelfareInstance};
