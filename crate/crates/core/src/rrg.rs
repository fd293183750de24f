//! Residual random greedy under matroid constraints, and the deterministic
//! greedy for random arrival order.
//!
//! Every matroid here is padded (see [`Padded`]) so that all bases have
//! exactly `k` elements and dummies contribute nothing. The smooth variant
//! runs `T` iterations; in each one, with probability `1 - |S|/k`, it adds a
//! uniformly random element of a maximum-marginal base `M` of the contracted
//! matroid. For a partition matroid this is the same as drawing one of the
//! `k` parts uniformly and, if the part is still free, adding its best
//! element (or its dummy when every real marginal is negative). The original
//! variant always adds a uniform element of `M` and stops after `k` steps.
//!
//! Stopping the smooth variant after `T = ⌈x*·k⌉` iterations guarantees an
//! expected value of at least `(e^{-a·x*} - e^{-b·x*})/√5 ≈ 0.27493` times
//! the optimum, with `a, b = (3 ∓ √5)/2` and `x* = ln(b/a)/√5`.
//!
//! Counting the free parts, the smooth variant needs `Z_i ~ Geom(1 - i/k)`
//! iterations to move from `i` to `i + 1` of them; [`sample_coupling`] and
//! [`exact_free_part_distribution`] describe that count directly.

use alloc::{collections::BTreeMap, vec, vec::Vec};

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{invalid, Error, Result};
use crate::function::{snap, Oracle};
use crate::matroid::{
    contract, greedy_max_base, Matroid, Padded, PartitionPadding, PartitionStructure,
};
use crate::online::{rank_bidders, GuardedView, EXACT_LIMIT};
use crate::perm::{all_permutations, check_permutation};
use crate::set::ItemSet;
use crate::welfare::{Allocation, WelfareInstance};

/// `a = (3 - √5)/2`, `b = (3 + √5)/2` and `x* = ln(b/a)/√5`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundConstants {
    pub a: f64,
    pub b: f64,
    pub x_star: f64,
}

pub fn constants() -> BoundConstants {
    let s5 = libm::sqrt(5.0);
    let b = (3.0 + s5) / 2.0;
    // 2/(3 + √5) avoids the cancellation in 3 - √5.
    let a = 2.0 / (3.0 + s5);
    BoundConstants {
        a,
        b,
        x_star: libm::log(b / a) / s5,
    }
}

/// `(e^{-a·x*} - e^{-b·x*})/√5`, the ratio approached as `k → ∞`.
pub fn limit_ratio() -> f64 {
    let c = constants();
    (libm::exp(-c.a * c.x_star) - libm::exp(-c.b * c.x_star)) / libm::sqrt(5.0)
}

/// `⌈x*·k⌉`.
pub fn default_t(k: usize) -> usize {
    libm::ceil(constants().x_star * k as f64) as usize
}

/// Lower bounds on `E[f(S_i)]` and `E[f(O_{S_i} ∪ S_i)]` after `i` smooth
/// iterations on a rank-`k` matroid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClosedFormBounds {
    pub solution: f64,
    pub union: f64,
}

pub fn closed_form_bounds(k: usize, i: usize, opt: f64) -> Result<ClosedFormBounds> {
    if k < 3 {
        return Err(invalid("the closed-form bounds need k >= 3"));
    }
    let c = constants();
    let s5 = libm::sqrt(5.0);
    let pa = libm::pow(1.0 - c.a / k as f64, i as f64);
    let pb = libm::pow(1.0 - c.b / k as f64, i as f64);
    Ok(ClosedFormBounds {
        solution: opt / s5 * (pa - pb),
        union: opt / (2.0 * s5) * ((s5 - 1.0) * pa + (s5 + 1.0) * pb),
    })
}

/// `(1 - a/k)^x - (1 - b/k)^x`: `√5` times the guaranteed ratio after `x`
/// iterations on rank `k` (real `x` allowed).
pub fn bound_gap(k: usize, x: f64) -> f64 {
    let c = constants();
    libm::pow(1.0 - c.a / k as f64, x) - libm::pow(1.0 - c.b / k as f64, x)
}

fn evaluate(f: &Oracle, s: &ItemSet, metered: bool) -> Result<f64> {
    let real = s.truncated(f.ground_size());
    if metered {
        f.eval(&real)
    } else {
        Ok(f.value_unmetered(&real))
    }
}

/// One iteration of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct RrgStep {
    /// The part drawn (partition form) or the uniform slot drawn (matroid forms).
    pub slot: usize,
    /// Element added, possibly a dummy.
    pub added: Option<usize>,
    /// `f(S_i)`.
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RrgRun {
    /// Final set over the padded ground set.
    pub set: ItemSet,
    pub value: f64,
    pub initial_value: f64,
    pub steps: Vec<RrgStep>,
    real: usize,
}

impl RrgRun {
    /// Final set without dummies.
    pub fn real_set(&self) -> ItemSet {
        self.set.truncated(self.real)
    }

    /// `S_0, .., S_T` over the padded ground set.
    pub fn states(&self) -> Vec<ItemSet> {
        let mut s = ItemSet::new();
        let mut out = Vec::with_capacity(self.steps.len() + 1);
        out.push(s.clone());
        for step in &self.steps {
            if let Some(e) = step.added {
                s.insert(e);
            }
            out.push(s.clone());
        }
        out
    }

    /// `f(S_0), .., f(S_T)`.
    pub fn values(&self) -> Vec<f64> {
        core::iter::once(self.initial_value)
            .chain(self.steps.iter().map(|s| s.value))
            .collect()
    }
}

fn check_ground(f: &Oracle, real: usize) -> Result<()> {
    if f.ground_size() != real {
        return Err(invalid("function and matroid have different ground sets"));
    }
    Ok(())
}

/// Element contributed by free part `j`: its best real element (lowest index
/// on ties) if that marginal is non-negative, the part's dummy otherwise.
fn part_choice(
    f: &Oracle,
    pad: &PartitionPadding,
    s: &ItemSet,
    value: f64,
    j: usize,
    metered: bool,
) -> Result<(usize, f64)> {
    let mut best: Option<(usize, f64, f64)> = None;
    for &e in pad.structure().part(j) {
        let v = evaluate(f, &s.with(e), metered)?;
        let gain = snap(v - value);
        if best.is_none_or(|(_, g, _)| gain > g) {
            best = Some((e, gain, v));
        }
    }
    Ok(match best {
        Some((e, gain, v)) if gain >= 0.0 => (e, v),
        _ => (pad.dummy_of(j), value),
    })
}

/// Smooth residual random greedy on a partition matroid, `t` iterations.
pub fn smooth_rrg_partition<R: Rng + ?Sized>(
    f: &Oracle,
    parts: &PartitionStructure,
    t: usize,
    rng: &mut R,
) -> Result<RrgRun> {
    check_ground(f, parts.ground_size())?;
    let pad = PartitionPadding::new(parts.clone());
    let k = parts.k();
    let mut used = vec![false; k];
    let mut s = ItemSet::new();
    let initial_value = evaluate(f, &s, true)?;
    let mut value = initial_value;
    let mut steps = Vec::with_capacity(t);
    for _ in 0..t {
        let j = rng.gen_range(0..k);
        let added = if used[j] {
            None
        } else {
            let (e, v) = part_choice(f, &pad, &s, value, j, true)?;
            used[j] = true;
            s.insert(e);
            value = v;
            Some(e)
        };
        steps.push(RrgStep {
            slot: j,
            added,
            value,
        });
    }
    Ok(RrgRun {
        set: s,
        value,
        initial_value,
        steps,
        real: parts.ground_size(),
    })
}

/// A maximum-marginal base of `m / s` with `f(s ∪ {e})` for each member,
/// in increasing element order. Real elements that cannot join `s` are not
/// queried.
fn base_with_values<P: Padded + ?Sized>(
    f: &Oracle,
    m: &P,
    s: &ItemSet,
    value: f64,
    metered: bool,
) -> Result<Vec<(usize, f64)>> {
    let c = contract(m, s)?;
    let ground = m.ground_size();
    let mut weights = vec![0.0; ground];
    let mut values = vec![value; ground];
    for e in 0..m.real_size() {
        if !s.contains(e) && c.is_independent(&ItemSet::singleton(e)) {
            let v = evaluate(f, &s.with(e), metered)?;
            weights[e] = snap(v - value);
            values[e] = v;
        } else {
            weights[e] = f64::NEG_INFINITY;
        }
    }
    Ok(greedy_max_base(&c, &weights)
        .iter()
        .map(|e| (e, values[e]))
        .collect())
}

/// `M`: a maximum-marginal base of the padded matroid contracted by `s`.
pub fn residual_base<P: Padded + ?Sized>(f: &Oracle, m: &P, s: &ItemSet) -> Result<ItemSet> {
    let value = evaluate(f, s, true)?;
    Ok(base_with_values(f, m, s, value, true)?
        .into_iter()
        .map(|(e, _)| e)
        .collect())
}

/// One smooth iteration from `s` (with `f(s) = value`): draws `r` uniformly
/// from `0..k` and adds the `r`-th element of `M` if `r < k - |s|`.
/// Returns the drawn slot and the added element with the new value.
pub fn smooth_matroid_step<P: Padded + ?Sized, R: Rng + ?Sized>(
    f: &Oracle,
    m: &P,
    s: &ItemSet,
    value: f64,
    rng: &mut R,
) -> Result<(usize, Option<(usize, f64)>)> {
    let k = m.rank();
    if k == 0 {
        return Ok((0, None));
    }
    let r = rng.gen_range(0..k);
    if r >= k.saturating_sub(s.len()) {
        return Ok((r, None));
    }
    let base = base_with_values(f, m, s, value, true)?;
    Ok((r, Some(base[r])))
}

/// Smooth residual random greedy on a padded matroid, `t` iterations.
pub fn smooth_rrg_matroid<P: Padded + ?Sized, R: Rng + ?Sized>(
    f: &Oracle,
    m: &P,
    t: usize,
    rng: &mut R,
) -> Result<RrgRun> {
    check_ground(f, m.real_size())?;
    let mut s = ItemSet::new();
    let initial_value = evaluate(f, &s, true)?;
    let mut value = initial_value;
    let mut steps = Vec::with_capacity(t);
    for _ in 0..t {
        let (slot, added) = smooth_matroid_step(f, m, &s, value, rng)?;
        if let Some((e, v)) = added {
            s.insert(e);
            value = v;
        }
        steps.push(RrgStep {
            slot,
            added: added.map(|(e, _)| e),
            value,
        });
    }
    Ok(RrgRun {
        set: s,
        value,
        initial_value,
        steps,
        real: m.real_size(),
    })
}

/// Original residual random greedy: `k` iterations, each adding a uniform
/// element of `M`.
pub fn original_rrg<P: Padded + ?Sized, R: Rng + ?Sized>(
    f: &Oracle,
    m: &P,
    rng: &mut R,
) -> Result<RrgRun> {
    check_ground(f, m.real_size())?;
    let mut s = ItemSet::new();
    let initial_value = evaluate(f, &s, true)?;
    let mut value = initial_value;
    let mut steps = Vec::with_capacity(m.rank());
    for _ in 0..m.rank() {
        let base = base_with_values(f, m, &s, value, true)?;
        let slot = rng.gen_range(0..base.len());
        let (e, v) = base[slot];
        s.insert(e);
        value = v;
        steps.push(RrgStep {
            slot,
            added: Some(e),
            value,
        });
    }
    Ok(RrgRun {
        set: s,
        value,
        initial_value,
        steps,
        real: m.real_size(),
    })
}

/// Each arriving item goes to the bidder with the largest marginal (lowest
/// index on ties) if that marginal is non-negative. Uses `n + m·n` queries.
pub fn deterministic_greedy(
    instance: &WelfareInstance,
    order: &[usize],
) -> Result<(Allocation, f64)> {
    check_permutation(order, instance.items())?;
    let n = instance.bidders();
    let mut view = GuardedView::new(instance);
    let mut alloc = Allocation::empty(n);
    let mut current = (0..n)
        .map(|j| view.eval(j, &ItemSet::new()))
        .collect::<Result<Vec<f64>>>()?;
    for &item in order {
        view.arrive(item)?;
        let (ranking, with_item) = rank_bidders(&mut view, &alloc, item, &current)?;
        if ranking.prefix > 0 {
            let j = ranking.order[0];
            alloc.assign(item, j);
            current[j] = with_item[j];
        }
    }
    Ok((alloc, current.iter().sum()))
}

/// [`deterministic_greedy`] on a uniformly random order, which is returned too.
pub fn random_order_greedy<R: Rng + ?Sized>(
    instance: &WelfareInstance,
    rng: &mut R,
) -> Result<(Vec<usize>, Allocation, f64)> {
    let mut order: Vec<usize> = (0..instance.items()).collect();
    order.shuffle(rng);
    let (alloc, welfare) = deterministic_greedy(instance, &order)?;
    Ok((order, alloc, welfare))
}

/// One draw of `Z ~ Geom(p)` on `{1, 2, ..}` by inversion; `None` stands for
/// `+∞` (`p = 0`).
pub fn sample_geometric<R: Rng + ?Sized>(p: f64, rng: &mut R) -> Option<u64> {
    if p >= 1.0 {
        return Some(1);
    }
    if p <= 0.0 {
        return None;
    }
    let u = 1.0 - rng.gen::<f64>();
    let z = libm::ceil(libm::log(u) / libm::log1p(-p));
    Some((z as u64).max(1))
}

/// Waiting times `Z_0, .., Z_{k-1}` with `Z_i ~ Geom(1 - i/k)` (and
/// `Z_k = ∞`), and the number of free parts hit within `t` iterations.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingSample {
    pub z: Vec<u64>,
    pub t: usize,
    /// `min{i : Z_0 + .. + Z_i > t}`.
    pub ell_t: usize,
}

impl CouplingSample {
    /// `T_0, .., T_k` with `T_ℓ = Z_0 + .. + Z_{ℓ-1}`.
    pub fn partial_sums(&self) -> Vec<u64> {
        let mut acc = 0;
        core::iter::once(0)
            .chain(self.z.iter().map(|z| {
                acc += z;
                acc
            }))
            .collect()
    }
}

pub fn sample_coupling<R: Rng + ?Sized>(k: usize, t: usize, rng: &mut R) -> Result<CouplingSample> {
    if k == 0 {
        return Err(invalid("k must be at least 1"));
    }
    let z: Vec<u64> = (0..k)
        .map(|i| {
            sample_geometric(1.0 - i as f64 / k as f64, rng)
                .expect("success probability is positive")
        })
        .collect();
    let mut total = 0u64;
    let ell_t = z
        .iter()
        .position(|&zi| {
            total = total.saturating_add(zi);
            total > t as u64
        })
        .unwrap_or(k);
    Ok(CouplingSample { z, t, ell_t })
}

/// Exact law of the number of parts hit after `t` smooth iterations with
/// `k` parts: a uniform part is drawn each iteration, and `c` parts already
/// hit absorb the draw with probability `c/k`. Index `c` holds `Pr[c]`.
pub fn exact_free_part_distribution(k: usize, t: usize) -> Vec<f64> {
    let mut dist = vec![0.0; k + 1];
    dist[0] = 1.0;
    for _ in 0..t {
        let mut next = vec![0.0; k + 1];
        for (c, &p) in dist.iter().enumerate() {
            let stay = c as f64 / k as f64;
            next[c] += p * stay;
            if c < k {
                next[c + 1] += p * (1.0 - stay);
            }
        }
        dist = next;
    }
    dist
}

/// Law of a randomized algorithm's final set.
pub type Distribution<T> = BTreeMap<T, f64>;

/// True if both laws put the same mass (within `tol`) on every outcome.
pub fn same_distribution<T: Ord>(a: &Distribution<T>, b: &Distribution<T>, tol: f64) -> bool {
    let mass = |d: &Distribution<T>, x: &T| d.get(x).copied().unwrap_or(0.0);
    a.keys()
        .chain(b.keys())
        .all(|x| (mass(a, x) - mass(b, x)).abs() <= tol)
}

fn check_states(states: usize) -> Result<()> {
    if states as u128 > EXACT_LIMIT {
        return Err(Error::Capacity {
            what: "exact state distribution",
            size: states as u128,
            limit: EXACT_LIMIT,
        });
    }
    Ok(())
}

/// Exact law of the final padded set of [`smooth_rrg_partition`].
pub fn exact_smooth_partition(
    f: &Oracle,
    parts: &PartitionStructure,
    t: usize,
) -> Result<Distribution<ItemSet>> {
    check_ground(f, parts.ground_size())?;
    let pad = PartitionPadding::new(parts.clone());
    let k = parts.k() as f64;
    let mut dist: Distribution<ItemSet> = BTreeMap::from([(ItemSet::new(), 1.0)]);
    for _ in 0..t {
        let mut next = BTreeMap::new();
        for (s, p) in dist {
            let value = evaluate(f, &s, false)?;
            for j in 0..parts.k() {
                let target = if s.iter().any(|e| pad.part_of(e) == j) {
                    s.clone()
                } else {
                    s.with(part_choice(f, &pad, &s, value, j, false)?.0)
                };
                *next.entry(target).or_insert(0.0) += p / k;
            }
        }
        check_states(next.len())?;
        dist = next;
    }
    Ok(dist)
}

/// Exact law of the final padded set of [`smooth_rrg_matroid`].
pub fn exact_smooth_matroid<P: Padded + ?Sized>(
    f: &Oracle,
    m: &P,
    t: usize,
) -> Result<Distribution<ItemSet>> {
    check_ground(f, m.real_size())?;
    let k = m.rank() as f64;
    let mut dist: Distribution<ItemSet> = BTreeMap::from([(ItemSet::new(), 1.0)]);
    for _ in 0..t {
        let mut next = BTreeMap::new();
        for (s, p) in dist {
            let value = evaluate(f, &s, false)?;
            let base = base_with_values(f, m, &s, value, false)?;
            for &(e, _) in &base {
                *next.entry(s.with(e)).or_insert(0.0) += p / k;
            }
            let stay = 1.0 - base.len() as f64 / k;
            if stay > 0.0 {
                *next.entry(s).or_insert(0.0) += p * stay;
            }
        }
        check_states(next.len())?;
        dist = next;
    }
    Ok(dist)
}

/// Exact law of the final padded set of [`original_rrg`].
pub fn exact_original_rrg<P: Padded + ?Sized>(f: &Oracle, m: &P) -> Result<Distribution<ItemSet>> {
    check_ground(f, m.real_size())?;
    let mut dist: Distribution<ItemSet> = BTreeMap::from([(ItemSet::new(), 1.0)]);
    for _ in 0..m.rank() {
        let mut next = BTreeMap::new();
        for (s, p) in dist {
            let value = evaluate(f, &s, false)?;
            let base = base_with_values(f, m, &s, value, false)?;
            let share = p / base.len() as f64;
            for (e, _) in base {
                *next.entry(s.with(e)).or_insert(0.0) += share;
            }
        }
        check_states(next.len())?;
        dist = next;
    }
    Ok(dist)
}

/// Exact law of the allocation of [`deterministic_greedy`] under a uniform
/// random order, by enumerating all `m!` orders.
pub fn exact_greedy_orders(instance: &WelfareInstance) -> Result<Distribution<Allocation>> {
    if instance.items() > 8 {
        return Err(Error::Capacity {
            what: "order enumeration items",
            size: instance.items() as u128,
            limit: 8,
        });
    }
    let orders = all_permutations(instance.items());
    let share = 1.0 / orders.len() as f64;
    let mut dist = BTreeMap::new();
    for order in orders {
        let (alloc, _) = deterministic_greedy(instance, &order)?;
        *dist.entry(alloc).or_insert(0.0) += share;
    }
    Ok(dist)
}

/// Expected `f` under a law over padded sets.
pub fn expected_value(f: &Oracle, dist: &Distribution<ItemSet>) -> f64 {
    dist.iter()
        .map(|(s, p)| p * f.value_unmetered(&s.truncated(f.ground_size())))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::function::{CoverageFunction, CutFunction, SetFunction, TableFunction};
    use crate::matroid::{GraphicMatroid, ParallelPadding, UniformMatroid};
    use crate::stats::{monte_carlo, trial_rng};
    use alloc::sync::Arc;

    #[test]
    fn constants_and_default_t() {
        let c = constants();
        assert!((c.a * c.b - 1.0).abs() < 1e-15);
        assert!((c.b - c.a - libm::sqrt(5.0)).abs() < 1e-15);
        assert!((c.a - 0.381966).abs() <= 1e-6);
        assert!((c.b - 2.61803).abs() <= 1e-5);
        assert!((c.x_star - 0.860818).abs() <= 1e-6, "{}", c.x_star);
        let r = limit_ratio();
        assert!((0.27492..=0.27494).contains(&r), "{r}");
        assert_eq!([default_t(1), default_t(10), default_t(100)], [1, 9, 87]);
    }

    #[test]
    fn closed_form_examples() {
        assert!(closed_form_bounds(2, 1, 1.0).is_err());
        for k in [3, 4, 7, 50] {
            let b0 = closed_form_bounds(k, 0, 6.0).unwrap();
            assert!(b0.solution.abs() < 1e-12 && (b0.union - 6.0).abs() < 1e-12);
            let b1 = closed_form_bounds(k, 1, 6.0).unwrap();
            assert!((b1.solution - 6.0 / k as f64).abs() < 1e-12);
        }
        let k = 1_000_000;
        let b = closed_form_bounds(k, default_t(k), 1.0).unwrap();
        assert!((b.solution - limit_ratio()).abs() < 1e-5);
    }

    #[test]
    fn closed_forms_satisfy_the_recursion() {
        // s_i = (1 - 1/k) s_{i-1} + u_{i-1}/k and u_i = (1 - 2/k) u_{i-1} + s_{i-1}/k
        for k in 3..12 {
            for i in 1..40 {
                let p = closed_form_bounds(k, i - 1, 1.0).unwrap();
                let q = closed_form_bounds(k, i, 1.0).unwrap();
                let kf = k as f64;
                assert!(
                    (q.solution - (p.solution * (1.0 - 1.0 / kf) + p.union / kf)).abs() < 1e-12
                );
                assert!((q.union - (p.union * (1.0 - 2.0 / kf) + p.solution / kf)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn guaranteed_gap_is_non_increasing_on_grid() {
        let x = constants().x_star;
        let gaps: Vec<f64> = (3..=1000).map(|k| bound_gap(k, x * k as f64)).collect();
        for (k, w) in (3..).zip(gaps.windows(2)) {
            assert!(w[1] <= w[0] + 1e-12, "k={k}: {} then {}", w[0], w[1]);
        }
        // rounding T up is not monotone in k but never drops below the limit
        let limit = limit_ratio() * libm::sqrt(5.0);
        assert!(bound_gap(8, default_t(8) as f64) > bound_gap(7, default_t(7) as f64));
        for k in 3..=1000 {
            assert!(bound_gap(k, default_t(k) as f64) >= limit, "k={k}");
        }
    }

    fn table(m: usize, values: &[f64]) -> Oracle {
        Oracle::new(TableFunction::validated(m, values.to_vec()).unwrap())
    }

    fn cut4() -> Oracle {
        Oracle::new(
            CutFunction::new(4, vec![(0, 1, 1.0), (1, 2, 2.0), (2, 3, 1.0), (0, 3, 1.0)]).unwrap(),
        )
    }

    #[test]
    fn single_part_examples() {
        let f = table(1, &[0.0, 1.0]);
        let parts = PartitionStructure::new(1, vec![vec![0]]).unwrap();
        let run = smooth_rrg_partition(&f, &parts, 1, &mut trial_rng(0, 0)).unwrap();
        assert_eq!((run.real_set(), run.value), (ItemSet::singleton(0), 1.0));
        let run = smooth_rrg_partition(&f, &parts, 0, &mut trial_rng(0, 0)).unwrap();
        assert_eq!((run.set.len(), run.value), (0, 0.0));
        let m = PartitionPadding::new(parts.clone());
        for seed in 0..20 {
            let a = original_rrg(&f, &m, &mut trial_rng(seed, 0)).unwrap();
            let b = smooth_rrg_matroid(&f, &m, 1, &mut trial_rng(seed, 0)).unwrap();
            assert_eq!(a.set, b.set);
        }
    }

    #[test]
    fn negative_parts_take_the_dummy() {
        // f(∅) = 1, adding the only element loses value
        let f = table(1, &[1.0, 0.0]);
        let parts = PartitionStructure::new(1, vec![vec![0]]).unwrap();
        let run = smooth_rrg_partition(&f, &parts, 3, &mut trial_rng(0, 0)).unwrap();
        assert_eq!(run.set, ItemSet::singleton(1));
        assert_eq!(run.value, 1.0);
    }

    #[test]
    fn trajectories_are_monotone_and_feasible() {
        let f = cut4();
        let parts = PartitionStructure::new(4, vec![vec![0, 2], vec![1], vec![3]]).unwrap();
        let pad = PartitionPadding::new(parts.clone());
        for seed in 0..200 {
            let run = smooth_rrg_partition(&f, &parts, 6, &mut trial_rng(seed, 0)).unwrap();
            let values = run.values();
            assert!(values.windows(2).all(|w| w[1] >= w[0] - 1e-9));
            for (a, b) in run.states().iter().zip(run.states().iter().skip(1)) {
                assert!(a.is_subset(b) && b.len() <= a.len() + 1 && pad.is_independent(b));
            }
            let graphic = ParallelPadding::new(
                GraphicMatroid::new(3, vec![(0, 1), (1, 2), (0, 2), (0, 1)]).unwrap(),
            );
            let run = smooth_rrg_matroid(&f, &graphic, 4, &mut trial_rng(seed, 1)).unwrap();
            assert!(run.values().windows(2).all(|w| w[1] >= w[0] - 1e-9));
            assert!(graphic.is_independent(&run.set));
        }
    }

    #[test]
    fn full_state_never_changes() {
        let f = cut4();
        let m = ParallelPadding::new(UniformMatroid {
            elements: 4,
            rank: 2,
        });
        let s = ItemSet::from_iter([1, 3]);
        let v = f.value_unmetered(&s);
        for seed in 0..50 {
            let (_, added) = smooth_matroid_step(&f, &m, &s, v, &mut trial_rng(seed, 0)).unwrap();
            assert!(added.is_none());
        }
    }

    #[test]
    fn partition_and_matroid_forms_share_a_law() {
        let f = cut4();
        for parts in [
            vec![vec![0, 1], vec![2, 3]],
            vec![vec![0], vec![1, 2], vec![3]],
            vec![vec![3, 0], vec![1], vec![2]],
        ] {
            let parts = PartitionStructure::new(4, parts).unwrap();
            let pad = PartitionPadding::new(parts.clone());
            for t in 0..5 {
                let a = exact_smooth_partition(&f, &parts, t).unwrap();
                let b = exact_smooth_matroid(&f, &pad, t).unwrap();
                assert!(same_distribution(&a, &b, 1e-12), "t={t}");
                assert!((a.values().sum::<f64>() - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn selection_probability_is_one_over_k() {
        let f = cut4();
        let m = ParallelPadding::new(UniformMatroid {
            elements: 4,
            rank: 3,
        });
        let s = ItemSet::singleton(2);
        let base = residual_base(&f, &m, &s).unwrap();
        assert_eq!(base.len(), 2);
        // from the empty set every base element carries 1/k
        let d = exact_smooth_matroid(&f, &m, 1).unwrap();
        for (set, p) in &d {
            if set.len() == 1 {
                assert!((p - 1.0 / 3.0).abs() < 1e-12, "{set:?}");
            }
        }
    }

    fn welfare_instance(utilities: Vec<Arc<dyn SetFunction>>, items: usize) -> WelfareInstance {
        WelfareInstance::new(items, utilities).unwrap()
    }

    #[test]
    fn greedy_examples() {
        let cut: Arc<dyn SetFunction> = Arc::new(CutFunction::new(2, vec![(0, 1, 1.0)]).unwrap());
        let inst = welfare_instance(vec![cut], 2);
        let (alloc, w) = deterministic_greedy(&inst, &[0, 1]).unwrap();
        assert_eq!((alloc.set(0).clone(), w), (ItemSet::singleton(0), 1.0));
        assert_eq!(inst.total_queries(), 1 + 2);

        let b1: Arc<dyn SetFunction> =
            Arc::new(TableFunction::validated(2, vec![2.0, 1.0, 1.0, 0.0]).unwrap());
        let b2: Arc<dyn SetFunction> =
            Arc::new(TableFunction::validated(2, vec![1.0, 0.5, 0.5, 0.0]).unwrap());
        let inst = welfare_instance(vec![b1, b2], 2);
        let (alloc, w) = deterministic_greedy(&inst, &[1, 0]).unwrap();
        assert_eq!(alloc, Allocation::empty(2));
        assert_eq!(w, 3.0);
        assert_eq!(inst.total_queries(), 2 + 2 * 2);
    }

    #[test]
    fn original_rrg_is_random_order_greedy() {
        let b1: Arc<dyn SetFunction> = Arc::new(
            CoverageFunction::new(
                vec![1.0, 2.0, 1.0],
                vec![
                    ItemSet::from_iter([0, 1]),
                    ItemSet::from_iter([1, 2]),
                    ItemSet::singleton(2),
                ],
            )
            .unwrap(),
        );
        let b2: Arc<dyn SetFunction> =
            Arc::new(CutFunction::new(3, vec![(0, 1, 1.0), (1, 2, 1.0), (0, 2, 2.0)]).unwrap());
        let inst = welfare_instance(vec![b1, b2], 3);
        let (f, parts) = inst.to_partition();
        let pad = PartitionPadding::new(parts);
        let rrg = exact_original_rrg(&f, &pad).unwrap();
        let mut as_alloc = BTreeMap::new();
        for (s, p) in rrg {
            let a = Allocation::from_ground_set(&s.truncated(6), 3, 2);
            *as_alloc.entry(a).or_insert(0.0) += p;
        }
        let greedy = exact_greedy_orders(&inst).unwrap();
        assert!(same_distribution(&as_alloc, &greedy, 1e-12));
    }

    #[test]
    fn geometric_draws() {
        let mut rng = trial_rng(5, 0);
        assert_eq!(sample_geometric(1.0, &mut rng), Some(1));
        assert_eq!(sample_geometric(0.0, &mut rng), None);
        let s = monte_carlo(200_000, 9, |r| sample_geometric(0.25, r).unwrap() as f64).unwrap();
        assert!((s.mean() - 4.0).abs() <= 4.0 * s.stderr(), "{}", s.mean());
        let one = sample_coupling(1, 7, &mut rng).unwrap();
        assert_eq!((one.z.clone(), one.ell_t), (vec![1], 1));
        let s = monte_carlo(200_000, 11, |r| {
            sample_coupling(2, 3, r).unwrap().partial_sums()[2] as f64
        })
        .unwrap();
        assert!((s.mean() - 3.0).abs() <= 4.0 * s.stderr(), "{}", s.mean());
    }

    #[test]
    fn coupling_law_matches_exact_chain() {
        let (k, t, n) = (3, 5, 200_000u64);
        let exact = exact_free_part_distribution(k, t);
        assert_eq!(exact[0], 0.0);
        let mut counts = vec![0u64; k + 1];
        for i in 0..n {
            counts[sample_coupling(k, t, &mut trial_rng(3, i)).unwrap().ell_t] += 1;
        }
        for c in 0..=k {
            let p = exact[c];
            let sigma = libm::sqrt(p * (1.0 - p) / n as f64);
            assert!(
                (counts[c] as f64 / n as f64 - p).abs() <= 4.0 * sigma + 1e-12,
                "c={c}"
            );
        }
    }
}
