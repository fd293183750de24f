//! Deterministic online allocators and the two-item adaptive construction
//! that holds every one of them to a ratio of at most `1/M`.
//!
//! A single bidder faces items `v1` (item 0) and `v2` (item 1). Before the
//! allocator decides on `v1` it can only learn `f(∅) = 0` and `f({v1}) = 1`.
//! Once the decision is known the adversary commits to one of two
//! extensions:
//!
//! | case | trigger          | f({v2}) | f({v1, v2}) | optimum        |
//! |------|------------------|---------|-------------|----------------|
//! | A    | `v1` discarded   | 0       | 1           | 1              |
//! | B    | `v1` assigned    | `M`     | 0           | `max(1, M)`    |
//!
//! Both extensions are non-negative and submodular.

use alloc::{boxed::Box, vec, vec::Vec};

use crate::error::{invalid, Error, Result};
use crate::function::{snap, TableFunction};
use crate::online::{sample_assignment, BidderRanking, GuardedView};
use crate::perm::check_permutation;
use crate::set::ItemSet;
use crate::stats::TrialRng;
use crate::welfare::{Allocation, WelfareInstance};

/// The value queries an online allocator may issue.
pub trait ValueQueries {
    fn bidders(&self) -> usize;
    fn value(&mut self, bidder: usize, s: &ItemSet) -> Result<f64>;
}

impl ValueQueries for GuardedView<'_> {
    fn bidders(&self) -> usize {
        self.instance().bidders()
    }

    fn value(&mut self, bidder: usize, s: &ItemSet) -> Result<f64> {
        self.eval(bidder, s)
    }
}

/// An online allocator deciding each item on arrival.
pub trait OnlineAllocator {
    fn name(&self) -> &'static str;

    /// Whether `decide` is a function of the query answers alone.
    fn is_deterministic(&self) -> bool;

    /// Bidder for the newly arrived `item`, or `None` to discard it.
    fn decide(
        &mut self,
        queries: &mut dyn ValueQueries,
        item: usize,
        state: &Allocation,
    ) -> Result<Option<usize>>;
}

fn marginals(queries: &mut dyn ValueQueries, item: usize, state: &Allocation) -> Result<Vec<f64>> {
    (0..queries.bidders())
        .map(|j| {
            let s = state.set(j);
            Ok(queries.value(j, &s.with(item))? - queries.value(j, s)?)
        })
        .collect()
}

/// Gives each item to the bidder with the largest marginal (lowest index on
/// ties) when that marginal is non-negative.
#[derive(Debug, Clone, Copy, Default)]
pub struct GreedyAllocator;

impl OnlineAllocator for GreedyAllocator {
    fn name(&self) -> &'static str {
        "greedy"
    }

    fn is_deterministic(&self) -> bool {
        true
    }

    fn decide(
        &mut self,
        queries: &mut dyn ValueQueries,
        item: usize,
        state: &Allocation,
    ) -> Result<Option<usize>> {
        let gains = marginals(queries, item, state)?;
        let mut best: Option<(usize, f64)> = None;
        for (j, g) in gains.into_iter().map(snap).enumerate() {
            if best.is_none_or(|(_, b)| g > b) {
                best = Some((j, g));
            }
        }
        Ok(best.filter(|&(_, g)| g >= 0.0).map(|(j, _)| j))
    }
}

/// Discards everything.
#[derive(Debug, Clone, Copy, Default)]
pub struct DiscardAllocator;

impl OnlineAllocator for DiscardAllocator {
    fn name(&self) -> &'static str {
        "discard"
    }

    fn is_deterministic(&self) -> bool {
        true
    }

    fn decide(
        &mut self,
        _: &mut dyn ValueQueries,
        _: usize,
        _: &Allocation,
    ) -> Result<Option<usize>> {
        Ok(None)
    }
}

/// Gives every item to bidder 0 without looking.
#[derive(Debug, Clone, Copy, Default)]
pub struct FirstBidderAllocator;

impl OnlineAllocator for FirstBidderAllocator {
    fn name(&self) -> &'static str {
        "first"
    }

    fn is_deterministic(&self) -> bool {
        true
    }

    fn decide(
        &mut self,
        _: &mut dyn ValueQueries,
        _: usize,
        _: &Allocation,
    ) -> Result<Option<usize>> {
        Ok(Some(0))
    }
}

/// The dyadic rank allocator behind this trait; randomized.
#[derive(Debug, Clone)]
pub struct RandomizedRankAllocator {
    rng: TrialRng,
}

impl RandomizedRankAllocator {
    pub fn new(rng: TrialRng) -> Self {
        Self { rng }
    }
}

impl OnlineAllocator for RandomizedRankAllocator {
    fn name(&self) -> &'static str {
        "adv"
    }

    fn is_deterministic(&self) -> bool {
        false
    }

    fn decide(
        &mut self,
        queries: &mut dyn ValueQueries,
        item: usize,
        state: &Allocation,
    ) -> Result<Option<usize>> {
        let gains = marginals(queries, item, state)?;
        let ranking = BidderRanking::from_marginals(&gains);
        Ok(sample_assignment(&ranking, &mut self.rng))
    }
}

/// Looks up a deterministic allocator by its CLI name.
pub fn allocator_by_name(name: &str) -> Option<Box<dyn OnlineAllocator>> {
    match name {
        "greedy" => Some(Box::new(GreedyAllocator)),
        "discard" => Some(Box::new(DiscardAllocator)),
        "first" => Some(Box::new(FirstBidderAllocator)),
        _ => None,
    }
}

/// Feeds `order` to `allocator` through a guarded view of `instance`.
pub fn run_online(
    allocator: &mut dyn OnlineAllocator,
    instance: &WelfareInstance,
    order: &[usize],
) -> Result<(Allocation, f64)> {
    check_permutation(order, instance.items())?;
    let mut view = GuardedView::new(instance);
    let mut alloc = Allocation::empty(instance.bidders());
    for &item in order {
        view.arrive(item)?;
        if let Some(j) = allocator.decide(&mut view, item, &alloc)? {
            if j >= instance.bidders() {
                return Err(invalid("allocator chose a bidder that does not exist"));
            }
            alloc.assign(item, j);
        }
    }
    let welfare = alloc.welfare(instance)?;
    Ok((alloc, welfare))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HardnessCase {
    /// `v1` was discarded.
    A,
    /// `v1` was assigned.
    B,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Phase {
    Before,
    After(HardnessCase),
}

/// One-bidder oracle that answers only what is already fixed and commits
/// to an extension after the first decision.
#[derive(Debug, Clone)]
pub struct AdaptiveOracle {
    big: f64,
    phase: Phase,
    queries: u64,
}

impl AdaptiveOracle {
    pub fn new(big: f64) -> Result<Self> {
        if !(big.is_finite() && big > 0.0) {
            return Err(invalid("M must be a positive finite number"));
        }
        Ok(Self {
            big,
            phase: Phase::Before,
            queries: 0,
        })
    }

    pub fn commit(&mut self, case: HardnessCase) -> Result<()> {
        if self.phase != Phase::Before {
            return Err(invalid("the extension is already committed"));
        }
        self.phase = Phase::After(case);
        Ok(())
    }

    pub fn case(&self) -> Option<HardnessCase> {
        match self.phase {
            Phase::Before => None,
            Phase::After(c) => Some(c),
        }
    }

    /// The full table of a committed case, bit 0 for `v1` and bit 1 for `v2`.
    pub fn table(&self, case: HardnessCase) -> TableFunction {
        let values = match case {
            HardnessCase::A => vec![0.0, 1.0, 0.0, 1.0],
            HardnessCase::B => vec![0.0, 1.0, self.big, 0.0],
        };
        TableFunction::new(2, values).expect("two-item table")
    }

    pub fn queries(&self) -> u64 {
        self.queries
    }
}

impl ValueQueries for AdaptiveOracle {
    fn bidders(&self) -> usize {
        1
    }

    fn value(&mut self, bidder: usize, s: &ItemSet) -> Result<f64> {
        if bidder != 0 {
            return Err(Error::OutOfRange {
                item: bidder,
                ground: 1,
            });
        }
        let mask = match s.to_mask() {
            Some(m) if m < 4 => m as usize,
            _ => {
                return Err(Error::OutOfRange {
                    item: s.max_item().unwrap_or(0),
                    ground: 2,
                })
            }
        };
        self.queries += 1;
        match self.phase {
            Phase::Before if mask & 2 != 0 => Err(Error::NotArrived(1)),
            Phase::Before => Ok(if mask == 1 { 1.0 } else { 0.0 }),
            Phase::After(case) => Ok(self.table(case).at(mask)),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HardnessOutcome {
    pub case: HardnessCase,
    pub alg_value: f64,
    pub opt_value: f64,
    pub ratio: f64,
    pub allocation: ItemSet,
}

/// Plays the two-item construction against a deterministic allocator.
pub fn run_hardness(allocator: &mut dyn OnlineAllocator, big: f64) -> Result<HardnessOutcome> {
    if !allocator.is_deterministic() {
        return Err(Error::Randomized);
    }
    let mut oracle = AdaptiveOracle::new(big)?;
    let mut state = Allocation::empty(1);
    let mut decide = |oracle: &mut AdaptiveOracle, state: &mut Allocation, item| -> Result<bool> {
        match allocator.decide(oracle, item, state)? {
            Some(0) => {
                state.assign(item, 0);
                Ok(true)
            }
            Some(_) => Err(invalid("allocator chose a bidder that does not exist")),
            None => Ok(false),
        }
    };
    let case = if decide(&mut oracle, &mut state, 0)? {
        HardnessCase::B
    } else {
        HardnessCase::A
    };
    oracle.commit(case)?;
    decide(&mut oracle, &mut state, 1)?;

    let table = oracle.table(case);
    let held = state.set(0).clone();
    let alg_value = table.at(held.to_mask().expect("two items") as usize);
    let opt_value = table.values().iter().copied().fold(0.0, f64::max);
    Ok(HardnessOutcome {
        case,
        alg_value,
        opt_value,
        ratio: alg_value / opt_value,
        allocation: held,
    })
}
