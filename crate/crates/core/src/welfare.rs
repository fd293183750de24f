//! Welfare instances, allocations, and the reduction to a partition matroid.

use alloc::{format, sync::Arc, vec, vec::Vec};

use crate::error::{invalid, Result};
use crate::function::{Oracle, SetFunction};
use crate::matroid::PartitionStructure;
use crate::set::ItemSet;

/// `n` bidder utilities over a common set of `m` items.
#[derive(Debug, Clone)]
pub struct WelfareInstance {
    items: usize,
    bidders: Vec<Oracle>,
}

impl WelfareInstance {
    pub fn new(items: usize, utilities: Vec<Arc<dyn SetFunction>>) -> Result<Self> {
        if utilities.is_empty() {
            return Err(invalid("an instance needs at least one bidder"));
        }
        if let Some(j) = utilities.iter().position(|f| f.ground_size() != items) {
            return Err(invalid(format!(
                "bidder {j} is defined over {} items, expected {items}",
                utilities[j].ground_size()
            )));
        }
        Ok(Self {
            items,
            bidders: utilities.into_iter().map(Oracle::from_arc).collect(),
        })
    }

    pub fn items(&self) -> usize {
        self.items
    }

    pub fn bidders(&self) -> usize {
        self.bidders.len()
    }

    pub fn bidder(&self, j: usize) -> &Oracle {
        &self.bidders[j]
    }

    pub fn oracles(&self) -> &[Oracle] {
        &self.bidders
    }

    pub fn total_queries(&self) -> u64 {
        self.bidders.iter().map(Oracle::queries).sum()
    }

    pub fn reset_queries(&self) {
        self.bidders.iter().for_each(Oracle::reset_queries);
    }

    /// `Σ_j f_j(S_j)` without touching the query counters.
    pub fn welfare_unmetered(&self, alloc: &Allocation) -> f64 {
        self.bidders
            .iter()
            .zip(alloc.sets())
            .map(|(f, s)| f.value_unmetered(s))
            .sum()
    }

    /// The single objective over `items × bidders` (element `i·n + j` means
    /// item `i` goes to bidder `j`) and the partition whose part `i` holds
    /// the `n` copies of item `i`.
    pub fn to_partition(&self) -> (Oracle, PartitionStructure) {
        let n = self.bidders();
        let objective = WelfareObjective {
            items: self.items,
            utilities: self.bidders.iter().map(|o| o.function().clone()).collect(),
        };
        let parts = (0..self.items)
            .map(|i| (0..n).map(|j| i * n + j).collect())
            .collect();
        let parts =
            PartitionStructure::new(self.items * n, parts).expect("item parts are a partition");
        (Oracle::new(objective), parts)
    }
}

/// `f(S) = Σ_j f_j({i : (i, j) ∈ S})` over the product ground set.
pub struct WelfareObjective {
    items: usize,
    utilities: Vec<Arc<dyn SetFunction>>,
}

impl SetFunction for WelfareObjective {
    fn ground_size(&self) -> usize {
        self.items * self.utilities.len()
    }

    fn value(&self, s: &ItemSet) -> f64 {
        Allocation::from_ground_set(s, self.items, self.utilities.len())
            .sets()
            .iter()
            .zip(&self.utilities)
            .map(|(set, f)| f.value(set))
            .sum()
    }
}

/// Per-bidder item sets.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Allocation {
    sets: Vec<ItemSet>,
}

impl Allocation {
    pub fn empty(bidders: usize) -> Self {
        Self {
            sets: vec![ItemSet::new(); bidders],
        }
    }

    pub fn from_sets(sets: Vec<ItemSet>) -> Self {
        Self { sets }
    }

    /// Reads an allocation off a subset of the product ground set. If an item
    /// appears for several bidders each of them receives it.
    pub fn from_ground_set(s: &ItemSet, items: usize, bidders: usize) -> Self {
        let mut alloc = Self::empty(bidders);
        for e in s.iter().take_while(|&e| e < items * bidders) {
            alloc.sets[e % bidders].insert(e / bidders);
        }
        alloc
    }

    /// Inverse of [`Allocation::from_ground_set`].
    pub fn to_ground_set(&self) -> ItemSet {
        let n = self.sets.len();
        self.sets
            .iter()
            .enumerate()
            .flat_map(|(j, s)| s.iter().map(move |i| i * n + j))
            .collect()
    }

    pub fn sets(&self) -> &[ItemSet] {
        &self.sets
    }

    pub fn set(&self, bidder: usize) -> &ItemSet {
        &self.sets[bidder]
    }

    pub fn bidders(&self) -> usize {
        self.sets.len()
    }

    pub fn assign(&mut self, item: usize, bidder: usize) {
        self.sets[bidder].insert(item);
    }

    pub(crate) fn unassign(&mut self, item: usize, bidder: usize) {
        self.sets[bidder].remove(item);
    }

    /// Bidder holding `item`, if any.
    pub fn owner(&self, item: usize) -> Option<usize> {
        self.sets.iter().position(|s| s.contains(item))
    }

    pub fn assigned(&self) -> ItemSet {
        self.sets.iter().fold(ItemSet::new(), |acc, s| acc.union(s))
    }

    pub fn is_disjoint(&self) -> bool {
        let mut seen = ItemSet::new();
        for s in &self.sets {
            if !seen.is_disjoint(s) {
                return false;
            }
            seen = seen.union(s);
        }
        true
    }

    /// `Σ_j f_j(S_j)`, one metered query per bidder.
    pub fn welfare(&self, instance: &WelfareInstance) -> Result<f64> {
        self.sets
            .iter()
            .enumerate()
            .map(|(j, s)| instance.bidder(j).eval(s))
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::function::{CoverageFunction, CutFunction};
    use crate::matroid::Matroid;

    fn two_modular() -> WelfareInstance {
        let b1: Arc<dyn SetFunction> = Arc::new(CoverageFunction::modular(vec![3.0, 1.0]).unwrap());
        let b2: Arc<dyn SetFunction> = Arc::new(CoverageFunction::modular(vec![2.0, 2.0]).unwrap());
        WelfareInstance::new(2, vec![b1, b2]).unwrap()
    }

    #[test]
    fn ground_set_roundtrip() {
        let alloc = Allocation::from_sets(vec![ItemSet::singleton(0), ItemSet::singleton(1)]);
        let g = alloc.to_ground_set();
        assert_eq!(g, ItemSet::from_iter([0, 3]));
        assert_eq!(Allocation::from_ground_set(&g, 2, 2), alloc);
    }

    #[test]
    fn reduction_objective_matches_welfare() {
        let inst = two_modular();
        let (f, parts) = inst.to_partition();
        assert_eq!(parts.k(), 2);
        for mask in 0..16u64 {
            let s = ItemSet::from_mask(mask);
            if parts.is_independent(&s) {
                let alloc = Allocation::from_ground_set(&s, 2, 2);
                assert!(alloc.is_disjoint());
                assert_eq!(f.eval(&s).unwrap(), inst.welfare_unmetered(&alloc));
            }
        }
    }

    #[test]
    fn mismatched_ground_sets_rejected() {
        let f: Arc<dyn SetFunction> = Arc::new(CutFunction::new(3, vec![]).unwrap());
        assert!(WelfareInstance::new(2, vec![f]).is_err());
        assert!(WelfareInstance::new(2, vec![]).is_err());
    }
}
