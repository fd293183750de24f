//! Set functions, value oracles and the submodularity checks.

use alloc::{sync::Arc, vec, vec::Vec};
use core::sync::atomic::{AtomicU64, Ordering};

use crate::error::{invalid, Error, Result};
use crate::set::ItemSet;

/// Absolute tolerance for every comparison between function values.
pub const EPS: f64 = 1e-9;

/// Marginals in `[-EPS, 0)` are rounding noise around zero; treat them as zero
/// so that every argmax and every non-negativity guard agrees.
pub(crate) fn snap(marginal: f64) -> f64 {
    if (-EPS..0.0).contains(&marginal) {
        0.0
    } else {
        marginal
    }
}

/// Largest ground set an explicit table (and any exhaustive check) may have.
pub const TABLE_LIMIT: usize = 20;

/// A set function over the ground set `{0, .., ground_size() - 1}`.
///
/// Implementations must be pure: the same set always yields the same value.
/// Callers guarantee `s` lies inside the ground set; [`Oracle`] checks it.
pub trait SetFunction: Send + Sync {
    fn ground_size(&self) -> usize;
    fn value(&self, s: &ItemSet) -> f64;
}

/// Value-oracle access to a set function, counting every evaluation.
///
/// Cloning shares the underlying function but starts a fresh counter.
pub struct Oracle {
    func: Arc<dyn SetFunction>,
    queries: AtomicU64,
}

impl Oracle {
    pub fn new<F: SetFunction + 'static>(f: F) -> Self {
        Self::from_arc(Arc::new(f))
    }

    pub fn from_arc(func: Arc<dyn SetFunction>) -> Self {
        Self {
            func,
            queries: AtomicU64::new(0),
        }
    }

    pub fn ground_size(&self) -> usize {
        self.func.ground_size()
    }

    pub fn function(&self) -> &Arc<dyn SetFunction> {
        &self.func
    }

    pub fn eval(&self, s: &ItemSet) -> Result<f64> {
        let ground = self.ground_size();
        if let Some(item) = s.max_item().filter(|&i| i >= ground) {
            return Err(Error::OutOfRange { item, ground });
        }
        self.queries.fetch_add(1, Ordering::Relaxed);
        Ok(self.func.value(s))
    }

    /// `f(s ∪ {item}) - f(s)`; two queries.
    pub fn marginal(&self, item: usize, s: &ItemSet) -> Result<f64> {
        if s.contains(item) {
            return Err(Error::ItemInSet(item));
        }
        let with = self.eval(&s.with(item))?;
        Ok(with - self.eval(s)?)
    }

    /// Marginal against a known `f(s)`; one query.
    pub fn marginal_from(&self, item: usize, s: &ItemSet, base: f64) -> Result<f64> {
        if s.contains(item) {
            return Err(Error::ItemInSet(item));
        }
        Ok(self.eval(&s.with(item))? - base)
    }

    /// Evaluation that bypasses the counter. Only analysis code (diagnostics,
    /// brute force) uses this; algorithms always go through [`Oracle::eval`].
    pub fn value_unmetered(&self, s: &ItemSet) -> f64 {
        self.func.value(s)
    }

    pub fn queries(&self) -> u64 {
        self.queries.load(Ordering::Relaxed)
    }

    pub fn reset_queries(&self) {
        self.queries.store(0, Ordering::Relaxed);
    }
}

impl Clone for Oracle {
    fn clone(&self) -> Self {
        Self::from_arc(self.func.clone())
    }
}

impl core::fmt::Debug for Oracle {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("Oracle")
            .field("ground_size", &self.ground_size())
            .field("queries", &self.queries())
            .finish()
    }
}

/// Explicit table of all `2^m` values, indexed by subset bitmask.
#[derive(Debug, Clone, PartialEq)]
pub struct TableFunction {
    items: usize,
    values: Vec<f64>,
}

impl TableFunction {
    pub fn new(items: usize, values: Vec<f64>) -> Result<Self> {
        if items > TABLE_LIMIT {
            return Err(Error::Capacity {
                what: "table function items",
                size: items as u128,
                limit: TABLE_LIMIT as u128,
            });
        }
        if values.len() != 1 << items {
            return Err(invalid(alloc::format!(
                "table over {items} items needs {} values, got {}",
                1usize << items,
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(invalid("table values must be finite"));
        }
        Ok(Self { items, values })
    }

    /// Like [`TableFunction::new`] but also requires non-negativity and
    /// diminishing returns.
    pub fn validated(items: usize, values: Vec<f64>) -> Result<Self> {
        let t = Self::new(items, values)?;
        if let Some((mask, &value)) = t.values.iter().enumerate().find(|(_, v)| **v < 0.0) {
            return Err(Error::Negative {
                set: ItemSet::from_mask(mask as u64),
                value,
            });
        }
        if let Some(v) = submodularity_violation(&t) {
            return Err(Error::NotSubmodular {
                a: v.a,
                b: v.b,
                u: v.u,
            });
        }
        Ok(t)
    }

    pub fn items(&self) -> usize {
        self.items
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn at(&self, mask: usize) -> f64 {
        self.values[mask]
    }
}

impl SetFunction for TableFunction {
    fn ground_size(&self) -> usize {
        self.items
    }

    fn value(&self, s: &ItemSet) -> f64 {
        // Oracle range checks keep the mask below 2^items.
        self.values[s.to_mask().expect("table index within 64 bits") as usize]
    }
}

/// Tabulates `f` over its whole ground set.
pub fn materialize(f: &dyn SetFunction) -> Result<TableFunction> {
    let m = f.ground_size();
    if m > TABLE_LIMIT {
        return Err(Error::Capacity {
            what: "materialized ground set",
            size: m as u128,
            limit: TABLE_LIMIT as u128,
        });
    }
    let values = (0..1u64 << m)
        .map(|mask| f.value(&ItemSet::from_mask(mask)))
        .collect();
    TableFunction::new(m, values)
}

/// A witness `A ⊆ B`, `u ∉ B` with `f(u|A) < f(u|B)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub a: ItemSet,
    pub b: ItemSet,
    pub u: usize,
}

/// First diminishing-returns violation, scanning context sets by increasing
/// mask and then element pairs `v < u` with `B = A ∪ {v}`.
///
/// Checking single-element extensions `B = A ∪ {v}` is equivalent to the
/// full condition over all chains `A ⊆ B`.
pub fn submodularity_violation(t: &TableFunction) -> Option<Violation> {
    let m = t.items;
    for s in 0..1usize << m {
        let fs = t.values[s];
        for v in (0..m).filter(|v| s & (1 << v) == 0) {
            let fv = t.values[s | 1 << v];
            for u in (v + 1..m).filter(|u| s & (1 << u) == 0) {
                let fu = t.values[s | 1 << u];
                let fuv = t.values[s | 1 << u | 1 << v];
                if fu + fv < fuv + fs - EPS {
                    return Some(Violation {
                        a: ItemSet::from_mask(s as u64),
                        b: ItemSet::from_mask((s | 1 << v) as u64),
                        u,
                    });
                }
            }
        }
    }
    None
}

pub fn is_submodular(t: &TableFunction) -> bool {
    submodularity_violation(t).is_none()
}

pub fn is_nonnegative(t: &TableFunction) -> bool {
    t.values.iter().all(|&v| v >= 0.0)
}

/// Weighted coverage: `f(S)` is the total weight of universe elements covered
/// by at least one item of `S`. Monotone and submodular.
#[derive(Debug, Clone, PartialEq)]
pub struct CoverageFunction {
    weights: Vec<f64>,
    covers: Vec<ItemSet>,
}

impl CoverageFunction {
    /// `covers[i]` lists the universe elements item `i` covers.
    pub fn new(weights: Vec<f64>, covers: Vec<ItemSet>) -> Result<Self> {
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(invalid("coverage weights must be finite and non-negative"));
        }
        let universe = weights.len();
        if let Some(e) = covers
            .iter()
            .filter_map(ItemSet::max_item)
            .find(|&e| e >= universe)
        {
            return Err(Error::OutOfRange {
                item: e,
                ground: universe,
            });
        }
        Ok(Self { weights, covers })
    }

    /// Additive function `f(S) = Σ_{i∈S} w_i`, as coverage of private elements.
    pub fn modular(weights: Vec<f64>) -> Result<Self> {
        let covers = (0..weights.len()).map(ItemSet::singleton).collect();
        Self::new(weights, covers)
    }

    pub fn universe(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn covers(&self) -> &[ItemSet] {
        &self.covers
    }
}

impl SetFunction for CoverageFunction {
    fn ground_size(&self) -> usize {
        self.covers.len()
    }

    fn value(&self, s: &ItemSet) -> f64 {
        let covered = s
            .iter()
            .fold(ItemSet::new(), |acc, i| acc.union(&self.covers[i]));
        covered.iter().map(|e| self.weights[e]).sum()
    }
}

/// Weighted cut of an undirected graph whose vertices are the items.
/// Non-negative, symmetric, non-monotone and submodular.
#[derive(Debug, Clone, PartialEq)]
pub struct CutFunction {
    vertices: usize,
    edges: Vec<(usize, usize, f64)>,
}

impl CutFunction {
    pub fn new(vertices: usize, edges: Vec<(usize, usize, f64)>) -> Result<Self> {
        for &(a, b, w) in &edges {
            if a >= vertices || b >= vertices {
                return Err(Error::OutOfRange {
                    item: a.max(b),
                    ground: vertices,
                });
            }
            if a == b {
                return Err(invalid("cut graphs have no self-loops"));
            }
            if !w.is_finite() || w < 0.0 {
                return Err(invalid("edge weights must be finite and non-negative"));
            }
        }
        Ok(Self { vertices, edges })
    }

    pub fn edges(&self) -> &[(usize, usize, f64)] {
        &self.edges
    }
}

impl SetFunction for CutFunction {
    fn ground_size(&self) -> usize {
        self.vertices
    }

    fn value(&self, s: &ItemSet) -> f64 {
        self.edges
            .iter()
            .filter(|(a, b, _)| s.contains(*a) != s.contains(*b))
            .map(|(_, _, w)| w)
            .sum()
    }
}

/// Coverage minus additive prices: `f(S) = cover(S) - Σ_{i∈S} p_i`.
///
/// Only constructed when non-negativity can be verified exhaustively.
#[derive(Debug, Clone, PartialEq)]
pub struct PricedFunction {
    base: CoverageFunction,
    prices: Vec<f64>,
}

impl PricedFunction {
    pub fn new(base: CoverageFunction, prices: Vec<f64>) -> Result<Self> {
        let m = base.ground_size();
        if prices.len() != m {
            return Err(invalid("one price per item is required"));
        }
        if prices.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(invalid("prices must be finite and non-negative"));
        }
        if m > TABLE_LIMIT {
            return Err(Error::Capacity {
                what: "priced function non-negativity check",
                size: m as u128,
                limit: TABLE_LIMIT as u128,
            });
        }
        let f = Self { base, prices };
        for mask in 0..1u64 << m {
            let s = ItemSet::from_mask(mask);
            let value = f.value(&s);
            if value < -EPS {
                return Err(Error::Negative { set: s, value });
            }
        }
        Ok(f)
    }

    pub fn base(&self) -> &CoverageFunction {
        &self.base
    }

    pub fn prices(&self) -> &[f64] {
        &self.prices
    }
}

impl SetFunction for PricedFunction {
    fn ground_size(&self) -> usize {
        self.base.ground_size()
    }

    fn value(&self, s: &ItemSet) -> f64 {
        self.base.value(s) - s.iter().map(|i| self.prices[i]).sum::<f64>()
    }
}

/// Restriction of a function to its first `real` elements; the elements
/// `real..ground_size()` are zero-contribution dummies.
pub struct PaddedFunction {
    inner: Arc<dyn SetFunction>,
    padded: usize,
}

impl PaddedFunction {
    pub fn new(inner: Arc<dyn SetFunction>, padded_size: usize) -> Self {
        assert!(padded_size >= inner.ground_size());
        Self {
            inner,
            padded: padded_size,
        }
    }
}

impl SetFunction for PaddedFunction {
    fn ground_size(&self) -> usize {
        self.padded
    }

    fn value(&self, s: &ItemSet) -> f64 {
        self.inner.value(&s.truncated(self.inner.ground_size()))
    }
}

/// All-zero function on `m` items.
pub fn zero_table(items: usize) -> TableFunction {
    TableFunction {
        items,
        values: vec![0.0; 1 << items],
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cut2() -> Oracle {
        Oracle::new(CutFunction::new(2, vec![(0, 1, 1.0)]).unwrap())
    }

    fn cover3() -> Oracle {
        let covers = vec![ItemSet::from_iter([0, 1]), ItemSet::from_iter([1, 2])];
        Oracle::new(CoverageFunction::new(vec![1.0, 1.0, 1.0], covers).unwrap())
    }

    #[test]
    fn cut_eval() {
        let f = cut2();
        assert_eq!(f.eval(&ItemSet::new()).unwrap(), 0.0);
        assert_eq!(f.eval(&ItemSet::singleton(0)).unwrap(), 1.0);
        assert_eq!(f.eval(&ItemSet::from_iter([0, 1])).unwrap(), 0.0);
        assert_eq!(f.queries(), 3);
    }

    #[test]
    fn coverage_eval_and_marginal() {
        let f = cover3();
        assert_eq!(f.eval(&ItemSet::from_iter([0, 1])).unwrap(), 3.0);
        assert_eq!(f.marginal(1, &ItemSet::singleton(0)).unwrap(), 1.0);
        assert_eq!(f.queries(), 3);
    }

    #[test]
    fn marginals_on_cut() {
        let f = cut2();
        assert_eq!(f.marginal(1, &ItemSet::singleton(0)).unwrap(), -1.0);
        assert_eq!(f.marginal(0, &ItemSet::new()).unwrap(), 1.0);
        assert_eq!(f.queries(), 4);
        assert_eq!(
            f.marginal(0, &ItemSet::singleton(0)),
            Err(Error::ItemInSet(0))
        );
        assert_eq!(f.marginal_from(0, &ItemSet::new(), 0.0).unwrap(), 1.0);
        assert_eq!(f.queries(), 5);
    }

    #[test]
    fn out_of_range_is_rejected_without_counting() {
        let f = cut2();
        assert_eq!(
            f.eval(&ItemSet::singleton(2)),
            Err(Error::OutOfRange { item: 2, ground: 2 })
        );
        assert_eq!(f.queries(), 0);
    }

    #[test]
    fn submodularity_examples() {
        let cut = TableFunction::new(2, vec![0.0, 1.0, 1.0, 0.0]).unwrap();
        assert!(is_submodular(&cut));
        let sup = TableFunction::new(2, vec![0.0, 0.0, 0.0, 1.0]).unwrap();
        assert_eq!(
            submodularity_violation(&sup),
            Some(Violation {
                a: ItemSet::new(),
                b: ItemSet::singleton(0),
                u: 1
            })
        );
        let t = TableFunction::new(2, vec![2.0, 3.0, 1.0, 2.0]).unwrap();
        assert!(is_submodular(&t));
        assert!(TableFunction::validated(2, vec![0.0, 0.0, 0.0, 1.0]).is_err());
    }

    #[test]
    fn nonnegativity_examples() {
        assert!(is_nonnegative(
            &TableFunction::new(2, vec![0.0, 1.0, 1.0, 0.0]).unwrap()
        ));
        assert!(!is_nonnegative(
            &TableFunction::new(2, vec![0.0, 1.0, -0.5, 0.0]).unwrap()
        ));
        let base = CoverageFunction::new(vec![1.0], vec![ItemSet::singleton(0)]).unwrap();
        assert!(matches!(
            PricedFunction::new(base, vec![2.0]),
            Err(Error::Negative { value, .. }) if value == -1.0
        ));
    }

    #[test]
    fn table_limits() {
        assert!(matches!(
            TableFunction::new(21, Vec::new()),
            Err(Error::Capacity { .. })
        ));
        assert!(TableFunction::new(2, vec![0.0; 3]).is_err());
        let big = CoverageFunction::modular(vec![0.0; 21]).unwrap();
        assert!(matches!(
            PricedFunction::new(big, vec![0.0; 21]),
            Err(Error::Capacity { .. })
        ));
    }

    #[test]
    fn padded_dummies_contribute_nothing() {
        let inner: Arc<dyn SetFunction> = Arc::new(CutFunction::new(2, vec![(0, 1, 1.0)]).unwrap());
        let p = PaddedFunction::new(inner, 4);
        for mask in 0..16u64 {
            let s = ItemSet::from_mask(mask);
            assert_eq!(p.value(&s), p.value(&s.truncated(2)));
        }
    }

    #[test]
    fn concurrent_counting_loses_nothing() {
        let f = Arc::new(cut2());
        let handles: Vec<_> = (0..4)
            .map(|_| {
                let f = f.clone();
                std::thread::spawn(move || {
                    for _ in 0..1000 {
                        f.eval(&ItemSet::new()).unwrap();
                    }
                })
            })
            .collect();
        for h in handles {
            h.join().unwrap();
        }
        assert_eq!(f.queries(), 4000);
    }

    fn random_cut(m: usize) -> impl Strategy<Value = CutFunction> {
        proptest::collection::vec(0u8..4, m * (m - 1) / 2).prop_map(move |ws| {
            let mut edges = Vec::new();
            let mut k = 0;
            for a in 0..m {
                for b in a + 1..m {
                    if ws[k] > 0 {
                        edges.push((a, b, ws[k] as f64));
                    }
                    k += 1;
                }
            }
            CutFunction::new(m, edges).unwrap()
        })
    }

    fn random_coverage(m: usize) -> impl Strategy<Value = CoverageFunction> {
        (
            proptest::collection::vec(0u8..5, 6),
            proptest::collection::vec(0u64..64, m),
        )
            .prop_map(|(w, covers)| {
                CoverageFunction::new(
                    w.into_iter().map(f64::from).collect(),
                    covers.into_iter().map(ItemSet::from_mask).collect(),
                )
                .unwrap()
            })
    }

    proptest! {
        #[test]
        fn cut_and_coverage_tables_are_valid(cut in random_cut(6), cov in random_coverage(6)) {
            for f in [&cut as &dyn SetFunction, &cov] {
                let t = materialize(f).unwrap();
                prop_assert!(is_submodular(&t));
                prop_assert!(is_nonnegative(&t));
                for mask in 0..64u64 {
                    let s = ItemSet::from_mask(mask);
                    prop_assert_eq!(t.value(&s), f.value(&s));
                }
            }
        }

        #[test]
        fn diminishing_returns_on_chains(cut in random_cut(5), a in 0u64..32, extra in 0u64..32, u in 0usize..5) {
            let f = Oracle::new(cut);
            let a_set = ItemSet::from_mask(a);
            let b_set = ItemSet::from_mask(a | extra);
            prop_assume!(!b_set.contains(u));
            let ma = f.marginal(u, &a_set).unwrap();
            let mb = f.marginal(u, &b_set).unwrap();
            prop_assert!(ma >= mb - EPS);
        }
    }
}
