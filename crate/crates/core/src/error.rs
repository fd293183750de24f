use alloc::string::String;

use crate::set::ItemSet;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("item {item} is outside the ground set of size {ground}")]
    OutOfRange { item: usize, ground: usize },

    #[error("item {0} is already in the context set")]
    ItemInSet(usize),

    #[error("{what}: size {size} exceeds the limit {limit}")]
    Capacity {
        what: &'static str,
        size: u128,
        limit: u128,
    },

    #[error("function is negative ({value}) on {set:?}")]
    Negative { set: ItemSet, value: f64 },

    #[error("diminishing returns violated: A={a:?}, B={b:?}, u={u}")]
    NotSubmodular { a: ItemSet, b: ItemSet, u: usize },

    #[error("set {0:?} is dependent")]
    Dependent(ItemSet),

    #[error("not a matroid: {0}")]
    NotMatroid(String),

    #[error("query touches item {0}, which has not arrived yet")]
    NotArrived(usize),

    #[error("a deterministic allocator is required")]
    Randomized,

    #[error("sampler marginal {marginal} of item {item} exceeds p = {p}")]
    MarginalTooLarge { item: usize, marginal: f64, p: f64 },

    #[error("invalid argument: {0}")]
    Invalid(String),
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::Invalid(msg.into())
}
