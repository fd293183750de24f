//! Brute-force optima and executable checks of the analysis.
//!
//! Everything here enumerates: optimal welfare over all `(n+1)^m`
//! assignments, optimal independent sets, best extensions `O_S` of a
//! partial solution, exact expectations under product distributions. Ties
//! go to the smallest encoding (item or element 0 is the least significant
//! digit), so witnesses are reproducible.

use alloc::{collections::BTreeMap, vec, vec::Vec};

use rand::Rng;

use crate::error::{invalid, Error, Result};
use crate::function::{Oracle, TableFunction, EPS, TABLE_LIMIT};
use crate::matroid::{Matroid, Padded, PartitionStructure};
use crate::rrg::{
    closed_form_bounds, residual_base, sample_coupling, smooth_matroid_step, smooth_rrg_partition,
    ClosedFormBounds,
};
use crate::set::ItemSet;
use crate::stats::{trial_rng, TrialRng, TrialStats};
use crate::welfare::{Allocation, WelfareInstance};

/// Largest search space any enumeration here will visit.
pub const BRUTE_FORCE_LIMIT: u128 = 10_000_000;

fn capacity(what: &'static str, size: u128) -> Result<()> {
    if size > BRUTE_FORCE_LIMIT {
        return Err(Error::Capacity {
            what,
            size,
            limit: BRUTE_FORCE_LIMIT,
        });
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptResult<W> {
    pub value: f64,
    pub witness: W,
    /// Feasible candidates enumerated.
    pub search_space: u128,
    /// Metered oracle queries spent.
    pub queries: u64,
}

/// Optimal welfare over every assignment of each item to a bidder or to nobody.
pub fn brute_force_opt_welfare(instance: &WelfareInstance) -> Result<OptResult<Allocation>> {
    let (m, n) = (instance.items(), instance.bidders());
    let space = (n as u128 + 1).checked_pow(m as u32).unwrap_or(u128::MAX);
    capacity("welfare assignments", space)?;
    if m > TABLE_LIMIT {
        return Err(Error::Capacity {
            what: "welfare items",
            size: m as u128,
            limit: TABLE_LIMIT as u128,
        });
    }
    let before = instance.total_queries();
    let tables = (0..n)
        .map(|j| {
            (0..1u64 << m)
                .map(|mask| instance.bidder(j).eval(&ItemSet::from_mask(mask)))
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<Vec<_>>>()?;

    // Odometer over digits: 0 = nobody, j + 1 = bidder j; item 0 varies fastest.
    let mut digits = vec![0usize; m];
    let mut masks = vec![0usize; n];
    let mut best: Option<(f64, Vec<usize>)> = None;
    'outer: loop {
        let v: f64 = masks.iter().zip(&tables).map(|(&mask, t)| t[mask]).sum();
        if best.as_ref().is_none_or(|(b, _)| v > *b) {
            best = Some((v, digits.clone()));
        }
        for (i, d) in digits.iter_mut().enumerate() {
            if *d > 0 {
                masks[*d - 1] &= !(1 << i);
            }
            if *d < n {
                *d += 1;
                masks[*d - 1] |= 1 << i;
                continue 'outer;
            }
            *d = 0;
        }
        break;
    }
    let (value, digits) = best.expect("at least the empty assignment");
    let mut witness = Allocation::empty(n);
    for (i, d) in digits.into_iter().enumerate().filter(|&(_, d)| d > 0) {
        witness.assign(i, d - 1);
    }
    Ok(OptResult {
        value,
        witness,
        search_space: space,
        queries: instance.total_queries() - before,
    })
}

/// Optimal independent set of `m` under `f`.
pub fn brute_force_opt_matroid<M: Matroid + ?Sized>(
    f: &Oracle,
    m: &M,
) -> Result<OptResult<ItemSet>> {
    let ground = m.ground_size();
    if f.ground_size() != ground {
        return Err(invalid("function and matroid have different ground sets"));
    }
    capacity(
        "matroid subsets",
        1u128.checked_shl(ground as u32).unwrap_or(u128::MAX),
    )?;
    let before = f.queries();
    let mut best: Option<(f64, ItemSet)> = None;
    let mut feasible = 0u128;
    for mask in 0..1u64 << ground {
        let s = ItemSet::from_mask(mask);
        if !m.is_independent(&s) {
            continue;
        }
        feasible += 1;
        let v = f.eval(&s)?;
        if best.as_ref().is_none_or(|(b, _)| v > *b) {
            best = Some((v, s));
        }
    }
    let (value, witness) = best.expect("the empty set is independent");
    Ok(OptResult {
        value,
        witness,
        search_space: feasible,
        queries: f.queries() - before,
    })
}

/// `O_S \ S`: the real elements added and the dummies that complete the base.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Extension {
    pub real: ItemSet,
    pub dummies: usize,
}

/// `a` encodes to a smaller number than `b`.
fn smaller_encoding(a: &ItemSet, b: &ItemSet) -> bool {
    let diff = a.difference(b).union(&b.difference(a));
    diff.max_item().is_some_and(|e| b.contains(e))
}

struct ExtensionSearch<'a, P: ?Sized> {
    f: &'a Oracle,
    m: &'a P,
    candidates: Vec<usize>,
    best: Option<(f64, ItemSet)>,
    visited: u128,
}

impl<P: Padded + ?Sized> ExtensionSearch<'_, P> {
    fn visit(&mut self, from: usize, added: &mut ItemSet, current: &ItemSet) -> Result<()> {
        self.visited += 1;
        let v = self.f.eval(&current.truncated(self.m.real_size()))?;
        let better = match &self.best {
            None => true,
            Some((b, w)) => v > *b || (v == *b && smaller_encoding(added, w)),
        };
        if better {
            self.best = Some((v, added.clone()));
        }
        for idx in from..self.candidates.len() {
            let e = self.candidates[idx];
            let next = current.with(e);
            if self.m.is_independent(&next) {
                added.insert(e);
                self.visit(idx + 1, added, &next)?;
                added.remove(e);
            }
        }
        Ok(())
    }
}

/// Best extension `O_S` of an independent set `s` of a padded matroid: the
/// maximum of `f(S ∪ A)` over real `A` with `S ∪ A` independent. Dummies
/// complete the witness to a base.
pub fn best_extension<P: Padded + ?Sized>(
    f: &Oracle,
    m: &P,
    s: &ItemSet,
) -> Result<OptResult<Extension>> {
    if !m.is_independent(s) {
        return Err(Error::Dependent(s.clone()));
    }
    if f.ground_size() != m.real_size() {
        return Err(invalid("function and matroid have different ground sets"));
    }
    let candidates: Vec<usize> = (0..m.real_size())
        .filter(|&e| !s.contains(e) && m.is_independent(&s.with(e)))
        .collect();
    capacity(
        "extension subsets",
        1u128
            .checked_shl(candidates.len() as u32)
            .unwrap_or(u128::MAX),
    )?;
    let before = f.queries();
    let mut search = ExtensionSearch {
        f,
        m,
        candidates,
        best: None,
        visited: 0,
    };
    search.visit(0, &mut ItemSet::new(), s)?;
    let (value, real) = search.best.expect("the empty extension is feasible");
    let dummies = m.rank() - s.len() - real.len();
    Ok(OptResult {
        value,
        witness: Extension { real, dummies },
        search_space: search.visited,
        queries: f.queries() - before,
    })
}

/// Outcome of a sampling-lemma check `E[f(A)] ≥ (1 - p)·f(∅)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplingReport {
    pub p: f64,
    pub expected: f64,
    /// Standard error of `expected` (0 when exact).
    pub stderr: f64,
    pub bound: f64,
    pub holds: bool,
}

/// Exact check for the product distribution including item `i` with
/// probability `probs[i]`.
pub fn check_sampling_lemma(f: &TableFunction, probs: &[f64], p: f64) -> Result<SamplingReport> {
    if probs.len() != f.items() {
        return Err(invalid("one inclusion probability per item is needed"));
    }
    if let Some((item, &q)) = probs
        .iter()
        .enumerate()
        .find(|(_, q)| !(0.0..=p + EPS).contains(*q))
    {
        return Err(Error::MarginalTooLarge {
            item,
            marginal: q,
            p,
        });
    }
    let expected = f
        .values()
        .iter()
        .enumerate()
        .map(|(mask, v)| {
            let w: f64 = probs
                .iter()
                .enumerate()
                .map(|(i, q)| if mask & (1 << i) != 0 { *q } else { 1.0 - q })
                .product();
            w * v
        })
        .sum();
    let bound = (1.0 - p) * f.at(0);
    Ok(SamplingReport {
        p,
        expected,
        stderr: 0.0,
        bound,
        holds: expected >= bound - EPS,
    })
}

/// Monte Carlo check for an arbitrary (possibly correlated) sampler. The
/// sampler's empirical marginals must not exceed `p` by more than four
/// standard errors.
pub fn check_sampling_lemma_mc<S>(
    f: &TableFunction,
    mut sampler: S,
    p: f64,
    trials: usize,
    seed: u64,
) -> Result<SamplingReport>
where
    S: FnMut(&mut TrialRng) -> ItemSet,
{
    let m = f.items();
    let mut hits = vec![0u64; m];
    let mut values = Vec::with_capacity(trials);
    for t in 0..trials as u64 {
        let a = sampler(&mut trial_rng(seed, t));
        let mask = match a.to_mask() {
            Some(mask) if (mask as usize) < 1 << m => mask as usize,
            _ => return Err(invalid("sampler produced an item outside the ground set")),
        };
        for i in a.iter() {
            hits[i] += 1;
        }
        values.push(f.at(mask));
    }
    let n = trials as f64;
    for (item, &h) in hits.iter().enumerate() {
        let q = h as f64 / n;
        let se = libm::sqrt(q * (1.0 - q) / n);
        if q > p + 4.0 * se + EPS {
            return Err(Error::MarginalTooLarge {
                item,
                marginal: q,
                p,
            });
        }
    }
    let stats = TrialStats::from_values(values)?;
    let bound = (1.0 - p) * f.at(0);
    Ok(SamplingReport {
        p,
        expected: stats.mean(),
        stderr: stats.stderr(),
        bound,
        holds: stats.mean() >= bound - 3.0 * stats.stderr() - EPS,
    })
}

/// Mean and standard error of a per-trajectory quantity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
}

impl Estimate {
    fn of(values: Vec<f64>) -> Result<Self> {
        let s = TrialStats::from_values(values)?;
        Ok(Self {
            mean: s.mean(),
            stderr: s.stderr(),
        })
    }

    /// `mean ≥ -3·stderr` up to `EPS`.
    pub fn non_negative(&self) -> bool {
        self.mean >= -3.0 * self.stderr - EPS
    }
}

/// Per-iteration recursion diagnostics of the smooth partition algorithm.
#[derive(Debug, Clone, PartialEq)]
pub struct RecursionRow {
    pub iteration: usize,
    /// `f(S_i)`.
    pub value: Estimate,
    /// `f(O_{S_i} ∪ S_i)`.
    pub union: Estimate,
    pub bounds: ClosedFormBounds,
    /// `f(S_i) - f(S_{i-1}) - (f(O ∪ S_{i-1}) - f(S_{i-1}))/k`, per trajectory.
    pub progress: Option<Estimate>,
    /// `f(O_{S_i} ∪ S_i) - (1 - 2/k)·f(O ∪ S_{i-1}) - f(S_{i-1})/k`.
    pub decay: Option<Estimate>,
    pub holds: bool,
}

/// Runs `trials` trajectories of `t` smooth iterations and checks, at each
/// iteration, the one-step progress and decay inequalities and dominance
/// of the closed-form bounds (all within three standard errors; at `i = 0`
/// exactly). Best extensions come from [`best_extension`], memoized.
pub fn check_recursions(
    f: &Oracle,
    parts: &PartitionStructure,
    t: usize,
    trials: usize,
    seed: u64,
) -> Result<Vec<RecursionRow>> {
    let pad = crate::matroid::PartitionPadding::new(parts.clone());
    let k = parts.k();
    let kf = k as f64;
    let opt = best_extension(f, &pad, &ItemSet::new())?.value;
    let mut memo: BTreeMap<ItemSet, f64> = BTreeMap::new();
    let mut values = vec![Vec::with_capacity(trials); t + 1];
    let mut unions = vec![Vec::with_capacity(trials); t + 1];
    for trial in 0..trials as u64 {
        let run = smooth_rrg_partition(f, parts, t, &mut trial_rng(seed, trial))?;
        for (i, (s, v)) in run.states().into_iter().zip(run.values()).enumerate() {
            let u = match memo.get(&s) {
                Some(&u) => u,
                None => {
                    let u = best_extension(f, &pad, &s)?.value;
                    memo.insert(s, u);
                    u
                }
            };
            values[i].push(v);
            unions[i].push(u);
        }
    }
    (0..=t)
        .map(|i| {
            let value = Estimate::of(values[i].clone())?;
            let union = Estimate::of(unions[i].clone())?;
            let bounds = closed_form_bounds(k, i, opt)?;
            let (progress, decay) = if i == 0 {
                (None, None)
            } else {
                let per = |g: &dyn Fn(usize) -> f64| (0..trials).map(g).collect::<Vec<f64>>();
                let progress = per(&|r| {
                    values[i][r] - values[i - 1][r] - (unions[i - 1][r] - values[i - 1][r]) / kf
                });
                let decay = per(&|r| {
                    unions[i][r] - (1.0 - 2.0 / kf) * unions[i - 1][r] - values[i - 1][r] / kf
                });
                (Some(Estimate::of(progress)?), Some(Estimate::of(decay)?))
            };
            let holds = if i == 0 {
                value.mean >= bounds.solution - EPS && (union.mean - opt).abs() <= EPS
            } else {
                progress.is_some_and(|e| e.non_negative())
                    && decay.is_some_and(|e| e.non_negative())
                    && value.mean >= bounds.solution - 3.0 * value.stderr - EPS
                    && union.mean >= bounds.union - 3.0 * union.stderr - EPS
            };
            Ok(RecursionRow {
                iteration: i,
                value,
                union,
                bounds,
                progress,
                decay,
                holds,
            })
        })
        .collect()
}

/// Per-element selection frequency of one smooth iteration from a fixed state.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectionReport {
    pub k: usize,
    pub iterations: u64,
    /// `M` for the fixed state.
    pub candidates: Vec<usize>,
    pub counts: Vec<u64>,
    /// `(1 - |S|/k)/|M|`, which should be `1/k`.
    pub predicted: f64,
    /// `sqrt(q(1 - q)/iterations)` for `q = 1/k`.
    pub sigma: f64,
    /// Largest `|frequency - 1/k|` in units of `sigma`.
    pub max_deviation: f64,
    pub holds: bool,
}

/// Repeats one smooth iteration from `s` and tallies which element of `M`
/// is added; every element should come up with frequency `1/k`.
pub fn check_selection_frequency<P: Padded + ?Sized>(
    f: &Oracle,
    m: &P,
    s: &ItemSet,
    iterations: u64,
    seed: u64,
) -> Result<SelectionReport> {
    let k = m.rank();
    let candidates: Vec<usize> = residual_base(f, m, s)?.iter().collect();
    if candidates.is_empty() {
        return Err(invalid("the state is already a base"));
    }
    let value = f.eval(&s.truncated(m.real_size()))?;
    let mut counts = vec![0u64; candidates.len()];
    let mut rng = trial_rng(seed, 0);
    for _ in 0..iterations {
        if let (_, Some((e, _))) = smooth_matroid_step(f, m, s, value, &mut rng)? {
            let idx = candidates
                .iter()
                .position(|&c| c == e)
                .ok_or_else(|| invalid("added element is not in the residual base"))?;
            counts[idx] += 1;
        }
    }
    let q = 1.0 / k as f64;
    let predicted = (1.0 - s.len() as f64 / k as f64) / candidates.len() as f64;
    let sigma = libm::sqrt(q * (1.0 - q) / iterations as f64);
    let max_deviation = counts
        .iter()
        .map(|&c| (c as f64 / iterations as f64 - q).abs() / sigma)
        .fold(0.0, f64::max);
    Ok(SelectionReport {
        k,
        iterations,
        candidates,
        counts,
        predicted,
        sigma,
        max_deviation,
        holds: (predicted - q).abs() <= 1e-12 && max_deviation <= 4.0,
    })
}

/// Histogram (index = count, `0..=k`) of parts hit after `t` smooth
/// partition iterations, over `samples` runs.
pub fn hit_part_counts(
    f: &Oracle,
    parts: &PartitionStructure,
    t: usize,
    samples: u64,
    seed: u64,
) -> Result<Vec<u64>> {
    let mut hist = vec![0u64; parts.k() + 1];
    for i in 0..samples {
        hist[smooth_rrg_partition(f, parts, t, &mut trial_rng(seed, i))?
            .set
            .len()] += 1;
    }
    Ok(hist)
}

/// Histogram of `ℓ_T` from the geometric coupling.
pub fn coupling_counts(k: usize, t: usize, samples: u64, seed: u64) -> Result<Vec<u64>> {
    let mut hist = vec![0u64; k + 1];
    for i in 0..samples {
        hist[sample_coupling(k, t, &mut trial_rng(seed, i))?.ell_t] += 1;
    }
    Ok(hist)
}

/// Pearson statistic for two histograms coming from one law, with its
/// degrees of freedom (occupied categories minus one).
pub fn chi_squared_homogeneity(a: &[u64], b: &[u64]) -> Result<(f64, usize)> {
    if a.len() != b.len() {
        return Err(invalid("histograms need the same categories"));
    }
    let (na, nb) = (a.iter().sum::<u64>() as f64, b.iter().sum::<u64>() as f64);
    if na == 0.0 || nb == 0.0 {
        return Err(invalid("empty histogram"));
    }
    let mut stat = 0.0;
    let mut occupied = 0;
    for (&x, &y) in a.iter().zip(b) {
        let total = (x + y) as f64;
        if total == 0.0 {
            continue;
        }
        occupied += 1;
        let ea = total * na / (na + nb);
        let eb = total * nb / (na + nb);
        let (da, db) = (x as f64 - ea, y as f64 - eb);
        stat += da * da / ea + db * db / eb;
    }
    Ok((stat, occupied.max(1) - 1))
}

/// Independent inclusion probabilities drawn uniformly from `[0, p]`.
pub fn random_product_distribution<R: Rng + ?Sized>(items: usize, p: f64, rng: &mut R) -> Vec<f64> {
    (0..items).map(|_| rng.gen::<f64>() * p).collect()
}
