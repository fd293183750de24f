//! Randomized rank allocator for adversarial arrival order.
//!
//! When item `i` arrives, bidders are ranked by their current marginal for
//! `i`; the `r`-th ranked bidder receives the item with probability `2^-r`
//! provided its marginal is non-negative, and the item is discarded with the
//! remaining probability (`2^-ℓ` when `ℓ` bidders have non-negative
//! marginals). For every arrival order the expected welfare is at least a
//! quarter of the offline optimum.
//!
//! Besides the allocator itself this module carries the analysis side: the
//! per-iteration profit `P^i = f(S^i) - f(S^{i-1})`, the hybrid solutions
//! `H^i_j = (O_j ∩ arrived) ∪ S^i_j` against a reference optimum `O` with
//! their increments `K^i`, and an exact engine that enumerates every random
//! branch with its dyadic probability.

use alloc::{vec, vec::Vec};

use rand::{Rng, RngCore};

use crate::error::{invalid, Error, Result};
use crate::function::{snap, EPS};
use crate::perm::{all_permutations, check_permutation};
use crate::set::ItemSet;
use crate::stats::{trial_rng, TrialStats};
use crate::welfare::{Allocation, WelfareInstance};

/// Largest number of leaves the exact engines will enumerate.
pub const EXACT_LIMIT: u128 = 10_000_000;

/// Query access to an instance restricted to items that have arrived.
#[derive(Debug)]
pub struct GuardedView<'a> {
    instance: &'a WelfareInstance,
    arrived: ItemSet,
    violations: u64,
}

impl<'a> GuardedView<'a> {
    pub fn new(instance: &'a WelfareInstance) -> Self {
        Self {
            instance,
            arrived: ItemSet::new(),
            violations: 0,
        }
    }

    pub fn instance(&self) -> &'a WelfareInstance {
        self.instance
    }

    pub fn arrive(&mut self, item: usize) -> Result<()> {
        if item >= self.instance.items() {
            return Err(Error::OutOfRange {
                item,
                ground: self.instance.items(),
            });
        }
        self.arrived.insert(item);
        Ok(())
    }

    pub fn arrived(&self) -> &ItemSet {
        &self.arrived
    }

    /// Metered `f_bidder(s)`; rejected (and counted) if `s` holds an item
    /// that has not arrived.
    pub fn eval(&mut self, bidder: usize, s: &ItemSet) -> Result<f64> {
        if let Some(item) = s.difference(&self.arrived).iter().next() {
            self.violations += 1;
            return Err(Error::NotArrived(item));
        }
        self.instance.bidder(bidder).eval(s)
    }

    /// Number of rejected queries so far.
    pub fn violations(&self) -> u64 {
        self.violations
    }
}

/// Bidders sorted by non-increasing marginal for the current item.
#[derive(Debug, Clone, PartialEq)]
pub struct BidderRanking {
    /// `order[r]` is the bidder with the `(r+1)`-th highest marginal.
    pub order: Vec<usize>,
    /// Marginals in rank order.
    pub marginals: Vec<f64>,
    /// Number of ranked bidders whose marginal is non-negative.
    pub prefix: usize,
}

impl BidderRanking {
    /// Stable descending sort of per-bidder marginals; ties keep the lower
    /// bidder index first. Marginals within `EPS` below zero count as zero.
    pub fn from_marginals(marginals: &[f64]) -> Self {
        let mut order: Vec<usize> = (0..marginals.len()).collect();
        order.sort_by(|&a, &b| snap(marginals[b]).total_cmp(&snap(marginals[a])));
        let ranked: Vec<f64> = order.iter().map(|&j| marginals[j]).collect();
        let prefix = ranked.iter().take_while(|&&m| snap(m) >= 0.0).count();
        Self {
            order,
            marginals: ranked,
            prefix,
        }
    }

    /// Probability that the `r`-th ranked bidder (0-based) receives the item.
    pub fn probability(&self, r: usize) -> f64 {
        if r < self.prefix {
            libm::exp2(-(r as f64 + 1.0))
        } else {
            0.0
        }
    }

    pub fn discard_probability(&self) -> f64 {
        libm::exp2(-(self.prefix as f64))
    }
}

/// Ranks the bidders for the newly arrived `item`.
///
/// `current[j]` must hold `f_j(S_j)`; one guarded query per bidder computes
/// `f_j(S_j ∪ {item})`, returned alongside the ranking (indexed by bidder).
pub fn rank_bidders(
    view: &mut GuardedView<'_>,
    state: &Allocation,
    item: usize,
    current: &[f64],
) -> Result<(BidderRanking, Vec<f64>)> {
    if state.owner(item).is_some() {
        return Err(invalid("item is already assigned"));
    }
    let with_item = (0..state.bidders())
        .map(|j| view.eval(j, &state.set(j).with(item)))
        .collect::<Result<Vec<f64>>>()?;
    let marginals: Vec<f64> = with_item.iter().zip(current).map(|(w, c)| w - c).collect();
    Ok((BidderRanking::from_marginals(&marginals), with_item))
}

/// Draws a rank `r ≥ 1` with `Pr[r] = 2^-r` exactly: the position of the
/// first one bit of a uniform 64-bit word (65 when the word is zero).
pub fn dyadic_rank<R: RngCore + ?Sized>(rng: &mut R) -> u32 {
    rng.next_u64().leading_zeros() + 1
}

/// Bidder receiving the item, or `None` for a discard.
pub fn sample_assignment<R: RngCore + ?Sized>(
    ranking: &BidderRanking,
    rng: &mut R,
) -> Option<usize> {
    let r = dyadic_rank(rng) as usize;
    (r <= ranking.prefix).then(|| ranking.order[r - 1])
}

/// Analysis quantities of one iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationDiagnostics {
    /// 1-based position in the arrival order.
    pub iteration: usize,
    pub item: usize,
    /// `P^i`.
    pub profit: f64,
    /// `K^i`.
    pub hybrid_delta: f64,
    pub assigned: Option<usize>,
    /// `H^i` per bidder.
    pub hybrid: Vec<ItemSet>,
}

#[derive(Debug, Clone)]
pub struct AdversarialRun {
    pub allocation: Allocation,
    pub welfare: f64,
    /// Present iff a reference optimum was supplied.
    pub diagnostics: Option<Vec<IterationDiagnostics>>,
}

fn check_reference(instance: &WelfareInstance, reference: Option<&Allocation>) -> Result<()> {
    match reference {
        Some(r) if r.bidders() != instance.bidders() || !r.is_disjoint() => Err(invalid(
            "reference must be a feasible allocation over the same bidders",
        )),
        _ => Ok(()),
    }
}

/// `Σ_j f_j((O_j ∩ arrived) ∪ S_j)`, unmetered. Items the reference leaves
/// unassigned belong to an implicit zero-utility bidder and add nothing.
fn hybrid_sets(reference: &Allocation, arrived: &ItemSet, state: &Allocation) -> Vec<ItemSet> {
    reference
        .sets()
        .iter()
        .zip(state.sets())
        .map(|(o, s)| o.intersection(arrived).union(s))
        .collect()
}

fn hybrid_value(instance: &WelfareInstance, hybrid: &[ItemSet]) -> f64 {
    hybrid
        .iter()
        .enumerate()
        .map(|(j, h)| instance.bidder(j).value_unmetered(h))
        .sum()
}

/// One run of the allocator over `order`.
///
/// Uses `n + m·n` metered queries: `f_j(∅)` once per bidder, then one query
/// per bidder per item (current values are cached). When `reference` is
/// given, per-iteration diagnostics are computed with unmetered evaluations.
pub fn run_adversarial<R: RngCore + ?Sized>(
    instance: &WelfareInstance,
    order: &[usize],
    rng: &mut R,
    reference: Option<&Allocation>,
) -> Result<AdversarialRun> {
    check_permutation(order, instance.items())?;
    check_reference(instance, reference)?;
    let n = instance.bidders();
    let mut view = GuardedView::new(instance);
    let mut alloc = Allocation::empty(n);
    let mut current = (0..n)
        .map(|j| view.eval(j, &ItemSet::new()))
        .collect::<Result<Vec<f64>>>()?;
    let mut diagnostics = reference.map(|_| Vec::with_capacity(order.len()));
    let mut hybrid_prev: f64 = current.iter().sum();

    for (step, &item) in order.iter().enumerate() {
        view.arrive(item)?;
        let before: f64 = current.iter().sum();
        let (ranking, with_item) = rank_bidders(&mut view, &alloc, item, &current)?;
        let choice = sample_assignment(&ranking, rng);
        if let Some(j) = choice {
            alloc.assign(item, j);
            current[j] = with_item[j];
        }
        if let (Some(diag), Some(o)) = (diagnostics.as_mut(), reference) {
            let hybrid = hybrid_sets(o, view.arrived(), &alloc);
            let h = hybrid_value(instance, &hybrid);
            diag.push(IterationDiagnostics {
                iteration: step + 1,
                item,
                profit: current.iter().sum::<f64>() - before,
                hybrid_delta: h - hybrid_prev,
                assigned: choice,
                hybrid,
            });
            hybrid_prev = h;
        }
    }
    Ok(AdversarialRun {
        welfare: current.iter().sum(),
        allocation: alloc,
        diagnostics,
    })
}

/// Single-bidder baseline: keep every item independently with probability ½.
pub fn run_random_half_baseline<R: RngCore + ?Sized>(
    instance: &WelfareInstance,
    order: &[usize],
    rng: &mut R,
) -> Result<(Allocation, f64)> {
    if instance.bidders() != 1 {
        return Err(invalid("the random-half baseline needs exactly one bidder"));
    }
    check_permutation(order, instance.items())?;
    let mut alloc = Allocation::empty(1);
    for &item in order {
        if rng.gen::<bool>() {
            alloc.assign(item, 0);
        }
    }
    let welfare = alloc.welfare(instance)?;
    Ok((alloc, welfare))
}

/// Exact expectations of the allocator on a fixed order.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactOutcome {
    pub expected_welfare: f64,
    /// `inclusion[i][j] = Pr[item i ends with bidder j]`.
    pub inclusion: Vec<Vec<f64>>,
    /// `E[P^i]` by 1-based iteration `i` (index `i - 1`).
    pub expected_profit: Vec<f64>,
    /// `E[K^i]`; all zero when no reference was supplied.
    pub expected_hybrid: Vec<f64>,
    pub leaves: u64,
}

struct ExactWalk<'a> {
    instance: &'a WelfareInstance,
    order: &'a [usize],
    reference: Option<&'a Allocation>,
    out: ExactOutcome,
}

impl ExactWalk<'_> {
    fn visit(
        &mut self,
        step: usize,
        alloc: &mut Allocation,
        current: &mut [f64],
        hybrid: f64,
        prob: f64,
    ) {
        if step == self.order.len() {
            self.out.expected_welfare += prob * current.iter().sum::<f64>();
            self.out.leaves += 1;
            return;
        }
        let item = self.order[step];
        let arrived: ItemSet = self.order[..=step].iter().copied().collect();
        let with_item: Vec<f64> = (0..current.len())
            .map(|j| {
                self.instance
                    .bidder(j)
                    .value_unmetered(&alloc.set(j).with(item))
            })
            .collect();
        let marginals: Vec<f64> = with_item
            .iter()
            .zip(current.iter())
            .map(|(w, c)| w - c)
            .collect();
        let ranking = BidderRanking::from_marginals(&marginals);

        let branches = (0..ranking.prefix)
            .map(|r| (Some(ranking.order[r]), ranking.probability(r)))
            .chain(core::iter::once((None, ranking.discard_probability())));
        for (choice, p) in branches {
            let p_branch = prob * p;
            let saved = choice.map(|j| current[j]);
            if let Some(j) = choice {
                alloc.assign(item, j);
                current[j] = with_item[j];
                self.out.inclusion[item][j] += p_branch;
            }
            let profit = choice.map_or(0.0, |j| marginals[j]);
            self.out.expected_profit[step] += p_branch * profit;
            let next_hybrid = match self.reference {
                Some(o) => {
                    let h = hybrid_value(self.instance, &hybrid_sets(o, &arrived, alloc));
                    self.out.expected_hybrid[step] += p_branch * (h - hybrid);
                    h
                }
                None => hybrid,
            };
            self.visit(step + 1, alloc, current, next_hybrid, p_branch);
            if let (Some(j), Some(v)) = (choice, saved) {
                alloc.unassign(item, j);
                current[j] = v;
            }
        }
    }
}

fn exact_capacity(instance: &WelfareInstance) -> Result<()> {
    let leaves = (instance.bidders() as u128 + 1).saturating_pow(instance.items() as u32);
    if leaves > EXACT_LIMIT {
        return Err(Error::Capacity {
            what: "exact branch enumeration",
            size: leaves,
            limit: EXACT_LIMIT,
        });
    }
    Ok(())
}

/// Enumerates every random branch of the allocator on `order` with its exact
/// dyadic probability.
pub fn exact_adversarial(
    instance: &WelfareInstance,
    order: &[usize],
    reference: Option<&Allocation>,
) -> Result<ExactOutcome> {
    check_permutation(order, instance.items())?;
    check_reference(instance, reference)?;
    exact_capacity(instance)?;
    let (m, n) = (instance.items(), instance.bidders());
    let mut current: Vec<f64> = (0..n)
        .map(|j| instance.bidder(j).value_unmetered(&ItemSet::new()))
        .collect();
    let hybrid = current.iter().sum();
    let mut walk = ExactWalk {
        instance,
        order,
        reference,
        out: ExactOutcome {
            expected_welfare: 0.0,
            inclusion: vec![vec![0.0; n]; m],
            expected_profit: vec![0.0; m],
            expected_hybrid: vec![0.0; m],
            leaves: 0,
        },
    };
    walk.visit(0, &mut Allocation::empty(n), &mut current, hybrid, 1.0);
    Ok(walk.out)
}

/// The arrival order minimizing exact expected welfare over all `m!` orders
/// (first such order lexicographically), with that expectation.
pub fn worst_order(instance: &WelfareInstance) -> Result<(Vec<usize>, f64)> {
    if instance.items() > 8 {
        return Err(Error::Capacity {
            what: "order enumeration items",
            size: instance.items() as u128,
            limit: 8,
        });
    }
    let mut worst: Option<(Vec<usize>, f64)> = None;
    for order in all_permutations(instance.items()) {
        let e = exact_adversarial(instance, &order, None)?.expected_welfare;
        if worst.as_ref().is_none_or(|(_, w)| e < *w) {
            worst = Some((order, e));
        }
    }
    Ok(worst.expect("at least one order"))
}

/// Per-iteration comparison of `K^i` against `2·P^i`.
#[derive(Debug, Clone, PartialEq)]
pub struct KpIteration {
    pub iteration: usize,
    pub mean_hybrid: f64,
    pub mean_profit: f64,
    /// Standard error of the paired difference `K^i - 2P^i` (0 for exact reports).
    pub stderr: f64,
    pub holds: bool,
}

/// Exact check of `E[K^i] ≤ 2·E[P^i]` at every iteration.
pub fn exact_lemma_k_vs_p(
    instance: &WelfareInstance,
    order: &[usize],
    reference: &Allocation,
) -> Result<Vec<KpIteration>> {
    let out = exact_adversarial(instance, order, Some(reference))?;
    Ok(out
        .expected_hybrid
        .iter()
        .zip(&out.expected_profit)
        .enumerate()
        .map(|(i, (&k, &p))| KpIteration {
            iteration: i + 1,
            mean_hybrid: k,
            mean_profit: p,
            stderr: 0.0,
            holds: k <= 2.0 * p + EPS,
        })
        .collect())
}

/// Monte Carlo check: mean `K^i - 2P^i` must not exceed three standard errors.
pub fn check_lemma_k_vs_p(
    instance: &WelfareInstance,
    order: &[usize],
    reference: &Allocation,
    trials: usize,
    seed: u64,
) -> Result<Vec<KpIteration>> {
    let m = instance.items();
    let mut k_vals = vec![Vec::with_capacity(trials); m];
    let mut p_vals = vec![Vec::with_capacity(trials); m];
    for t in 0..trials as u64 {
        let run = run_adversarial(instance, order, &mut trial_rng(seed, t), Some(reference))?;
        for (i, d) in run
            .diagnostics
            .expect("reference supplied")
            .iter()
            .enumerate()
        {
            k_vals[i].push(d.hybrid_delta);
            p_vals[i].push(d.profit);
        }
    }
    (0..m)
        .map(|i| {
            let diff: Vec<f64> = k_vals[i]
                .iter()
                .zip(&p_vals[i])
                .map(|(k, p)| k - 2.0 * p)
                .collect();
            let d = TrialStats::from_values(diff)?;
            let k = TrialStats::from_values(core::mem::take(&mut k_vals[i]))?;
            let p = TrialStats::from_values(core::mem::take(&mut p_vals[i]))?;
            Ok(KpIteration {
                iteration: i + 1,
                mean_hybrid: k.mean(),
                mean_profit: p.mean(),
                stderr: d.stderr(),
                holds: d.mean() <= 3.0 * d.stderr() + EPS,
            })
        })
        .collect()
}
