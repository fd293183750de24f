//! Matroids, contraction, dummy padding and the greedy max-weight base.

use alloc::{format, vec, vec::Vec};

use crate::error::{invalid, Error, Result};
use crate::set::ItemSet;

/// Independence oracle over the ground set `{0, .., ground_size() - 1}`.
///
/// Sets containing an index outside the ground set are never independent.
pub trait Matroid: Send + Sync {
    fn ground_size(&self) -> usize;
    fn is_independent(&self, s: &ItemSet) -> bool;

    /// Size of every base.
    fn rank(&self) -> usize {
        greedy_max_base(self, &vec![0.0; self.ground_size()]).len()
    }
}

impl<M: Matroid + ?Sized> Matroid for &M {
    fn ground_size(&self) -> usize {
        (**self).ground_size()
    }
    fn is_independent(&self, s: &ItemSet) -> bool {
        (**self).is_independent(s)
    }
    fn rank(&self) -> usize {
        (**self).rank()
    }
}

fn within(s: &ItemSet, ground: usize) -> bool {
    s.max_item().is_none_or(|e| e < ground)
}

/// Disjoint non-empty parts covering `{0, .., n-1}`; as a matroid, a set is
/// independent iff it meets every part at most once.
#[derive(Debug, Clone, PartialEq)]
pub struct PartitionStructure {
    parts: Vec<Vec<usize>>,
    part_of: Vec<usize>,
}

impl PartitionStructure {
    pub fn new(ground: usize, parts: Vec<Vec<usize>>) -> Result<Self> {
        let mut part_of = vec![usize::MAX; ground];
        for (j, part) in parts.iter().enumerate() {
            if part.is_empty() {
                return Err(invalid(format!("part {j} is empty")));
            }
            for &e in part {
                let slot = part_of
                    .get_mut(e)
                    .ok_or(Error::OutOfRange { item: e, ground })?;
                if *slot != usize::MAX {
                    return Err(invalid(format!("element {e} appears in two parts")));
                }
                *slot = j;
            }
        }
        if let Some(e) = part_of.iter().position(|&p| p == usize::MAX) {
            return Err(invalid(format!("element {e} belongs to no part")));
        }
        let mut parts = parts;
        for p in &mut parts {
            p.sort_unstable();
        }
        Ok(Self { parts, part_of })
    }

    /// Number of parts.
    pub fn k(&self) -> usize {
        self.parts.len()
    }

    pub fn parts(&self) -> &[Vec<usize>] {
        &self.parts
    }

    pub fn part(&self, j: usize) -> &[usize] {
        &self.parts[j]
    }

    pub fn part_of(&self, e: usize) -> usize {
        self.part_of[e]
    }
}

impl Matroid for PartitionStructure {
    fn ground_size(&self) -> usize {
        self.part_of.len()
    }

    fn is_independent(&self, s: &ItemSet) -> bool {
        if !within(s, self.ground_size()) {
            return false;
        }
        let mut seen = ItemSet::new();
        s.iter().all(|e| seen.insert(self.part_of[e]))
    }

    fn rank(&self) -> usize {
        self.k()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UniformMatroid {
    pub elements: usize,
    pub rank: usize,
}

impl Matroid for UniformMatroid {
    fn ground_size(&self) -> usize {
        self.elements
    }

    fn is_independent(&self, s: &ItemSet) -> bool {
        within(s, self.elements) && s.len() <= self.rank
    }

    fn rank(&self) -> usize {
        self.rank.min(self.elements)
    }
}

/// Cycle matroid of a multigraph: elements are edges, forests are independent.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphicMatroid {
    vertices: usize,
    edges: Vec<(usize, usize)>,
}

impl GraphicMatroid {
    pub fn new(vertices: usize, edges: Vec<(usize, usize)>) -> Result<Self> {
        if let Some(&(a, b)) = edges.iter().find(|(a, b)| *a >= vertices || *b >= vertices) {
            return Err(Error::OutOfRange {
                item: a.max(b),
                ground: vertices,
            });
        }
        Ok(Self { vertices, edges })
    }
}

impl Matroid for GraphicMatroid {
    fn ground_size(&self) -> usize {
        self.edges.len()
    }

    fn is_independent(&self, s: &ItemSet) -> bool {
        if !within(s, self.edges.len()) {
            return false;
        }
        let mut parent: Vec<usize> = (0..self.vertices).collect();
        fn root(parent: &mut [usize], mut v: usize) -> usize {
            while parent[v] != v {
                parent[v] = parent[parent[v]];
                v = parent[v];
            }
            v
        }
        for e in s {
            let (a, b) = self.edges[e];
            let (ra, rb) = (root(&mut parent, a), root(&mut parent, b));
            if ra == rb {
                return false;
            }
            parent[ra] = rb;
        }
        true
    }
}

/// Largest ground set accepted by [`TableMatroid`].
pub const TABLE_MATROID_LIMIT: usize = 16;

/// Matroid given by listing independent sets; the family is the downward
/// closure of the list (listing the bases is enough). Matroid axioms are
/// verified at construction.
#[derive(Debug, Clone, PartialEq)]
pub struct TableMatroid {
    elements: usize,
    independent: Vec<bool>,
    listed: Vec<ItemSet>,
}

impl TableMatroid {
    pub fn new(elements: usize, listed: Vec<ItemSet>) -> Result<Self> {
        if elements > TABLE_MATROID_LIMIT {
            return Err(Error::Capacity {
                what: "table matroid ground set",
                size: elements as u128,
                limit: TABLE_MATROID_LIMIT as u128,
            });
        }
        let full = 1usize << elements;
        let mut independent = vec![false; full];
        independent[0] = true;
        for s in &listed {
            match s.to_mask() {
                Some(mask) if (mask as usize) < full => independent[mask as usize] = true,
                _ => {
                    return Err(Error::OutOfRange {
                        item: s.max_item().unwrap_or(0),
                        ground: elements,
                    })
                }
            }
        }
        for mask in (0..full).rev() {
            if independent[mask] {
                for e in 0..elements {
                    if mask & (1 << e) != 0 {
                        independent[mask & !(1 << e)] = true;
                    }
                }
            }
        }
        // Rank function via r(X) = |X| if X is independent, else max over one-smaller subsets.
        let mut rank = vec![0u32; full];
        for mask in 1..full {
            rank[mask] = if independent[mask] {
                mask.count_ones()
            } else {
                (0..elements)
                    .filter(|e| mask & (1 << e) != 0)
                    .map(|e| rank[mask & !(1 << e)])
                    .max()
                    .unwrap_or(0)
            };
        }
        for mask in 0..full {
            for e in (0..elements).filter(|e| mask & (1 << e) == 0) {
                let re = rank[mask | 1 << e];
                for f in (e + 1..elements).filter(|f| mask & (1 << f) == 0) {
                    let rf = rank[mask | 1 << f];
                    let ref_ = rank[mask | 1 << e | 1 << f];
                    if re + rf < ref_ + rank[mask] {
                        return Err(Error::NotMatroid(format!(
                            "rank is not submodular at {:?} with {e}, {f}",
                            ItemSet::from_mask(mask as u64)
                        )));
                    }
                }
            }
        }
        Ok(Self {
            elements,
            independent,
            listed,
        })
    }

    pub fn listed(&self) -> &[ItemSet] {
        &self.listed
    }
}

impl Matroid for TableMatroid {
    fn ground_size(&self) -> usize {
        self.elements
    }

    fn is_independent(&self, s: &ItemSet) -> bool {
        match s.to_mask() {
            Some(mask) if within(s, self.elements) => self.independent[mask as usize],
            _ => false,
        }
    }
}

/// `M / S`: `S'` is independent iff `S' ∩ S = ∅` and `S' ∪ S` is independent in `M`.
#[derive(Debug, Clone)]
pub struct Contracted<M> {
    base: M,
    contracted: ItemSet,
    rank: usize,
}

impl<M: Matroid> Contracted<M> {
    pub fn contracted(&self) -> &ItemSet {
        &self.contracted
    }
}

/// Contracts `m` by the independent set `s`.
pub fn contract<M: Matroid>(m: M, s: &ItemSet) -> Result<Contracted<M>> {
    if !m.is_independent(s) {
        return Err(Error::Dependent(s.clone()));
    }
    let rank = m.rank() - s.len();
    Ok(Contracted {
        base: m,
        contracted: s.clone(),
        rank,
    })
}

impl<M: Matroid> Matroid for Contracted<M> {
    fn ground_size(&self) -> usize {
        self.base.ground_size()
    }

    fn is_independent(&self, s: &ItemSet) -> bool {
        s.is_disjoint(&self.contracted) && self.base.is_independent(&s.union(&self.contracted))
    }

    fn rank(&self) -> usize {
        self.rank
    }
}

/// A matroid whose ground set was padded with zero-value dummy elements so
/// that every maximal independent set has exactly `rank()` elements and any
/// independent set of real elements extends to a base with dummies alone.
/// Elements `0..real_size()` are real, the rest are dummies.
pub trait Padded: Matroid {
    fn real_size(&self) -> usize;

    fn is_dummy(&self, e: usize) -> bool {
        e >= self.real_size()
    }
}

/// Partition matroid with one extra dummy per part: dummy `n + j` joins part `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct PartitionPadding {
    parts: PartitionStructure,
}

impl PartitionPadding {
    pub fn new(parts: PartitionStructure) -> Self {
        Self { parts }
    }

    pub fn structure(&self) -> &PartitionStructure {
        &self.parts
    }

    pub fn dummy_of(&self, part: usize) -> usize {
        self.parts.ground_size() + part
    }

    /// Part of a real or dummy element.
    pub fn part_of(&self, e: usize) -> usize {
        let n = self.parts.ground_size();
        if e < n {
            self.parts.part_of(e)
        } else {
            e - n
        }
    }
}

impl Matroid for PartitionPadding {
    fn ground_size(&self) -> usize {
        self.parts.ground_size() + self.parts.k()
    }

    fn is_independent(&self, s: &ItemSet) -> bool {
        if !within(s, self.ground_size()) {
            return false;
        }
        let mut seen = ItemSet::new();
        s.iter().all(|e| seen.insert(self.part_of(e)))
    }

    fn rank(&self) -> usize {
        self.parts.k()
    }
}

impl Padded for PartitionPadding {
    fn real_size(&self) -> usize {
        self.parts.ground_size()
    }
}

/// Padding of a general matroid by a parallel zero-value copy `n + u` of
/// every element `u`: a set is independent iff it holds at most one of
/// `u, n + u` for each `u` and its projection onto the originals is
/// independent.
#[derive(Debug, Clone)]
pub struct ParallelPadding<M> {
    inner: M,
    real: usize,
    rank: usize,
}

impl<M: Matroid> ParallelPadding<M> {
    pub fn new(inner: M) -> Self {
        let real = inner.ground_size();
        let rank = inner.rank();
        Self { inner, real, rank }
    }

    pub fn inner(&self) -> &M {
        &self.inner
    }

    /// Maps every dummy to its original; `None` if some `u` and its copy both occur.
    pub fn project(&self, s: &ItemSet) -> Option<ItemSet> {
        let mut proj = ItemSet::new();
        for e in s {
            let original = if e < self.real { e } else { e - self.real };
            if !proj.insert(original) {
                return None;
            }
        }
        Some(proj)
    }
}

impl<M: Matroid> Matroid for ParallelPadding<M> {
    fn ground_size(&self) -> usize {
        2 * self.real
    }

    fn is_independent(&self, s: &ItemSet) -> bool {
        within(s, 2 * self.real)
            && self
                .project(s)
                .is_some_and(|p| self.inner.is_independent(&p))
    }

    fn rank(&self) -> usize {
        self.rank
    }
}

impl<M: Matroid> Padded for ParallelPadding<M> {
    fn real_size(&self) -> usize {
        self.real
    }
}

/// Matroid greedy: visit elements by decreasing weight (lowest index first
/// among equal weights) and keep each one that preserves independence.
/// Returns a maximum-weight base.
pub fn greedy_max_base<M: Matroid + ?Sized>(m: &M, weights: &[f64]) -> ItemSet {
    assert_eq!(weights.len(), m.ground_size(), "one weight per element");
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| weights[b].total_cmp(&weights[a]).then(a.cmp(&b)));
    let mut base = ItemSet::new();
    for e in order {
        let candidate = base.with(e);
        if m.is_independent(&candidate) {
            base = candidate;
        }
    }
    base
}

#[cfg(test)]
mod tests {
    use super::*;

    fn all_subsets(n: usize) -> impl Iterator<Item = ItemSet> {
        (0..1u64 << n).map(ItemSet::from_mask)
    }

    fn two_parts() -> PartitionStructure {
        PartitionStructure::new(4, vec![vec![0, 1], vec![2, 3]]).unwrap()
    }

    #[test]
    fn independence_examples() {
        let p = two_parts();
        assert!(p.is_independent(&ItemSet::new()));
        assert!(!p.is_independent(&ItemSet::from_iter([0, 1])));
        assert!(p.is_independent(&ItemSet::from_iter([0, 3])));
        let u = UniformMatroid {
            elements: 4,
            rank: 2,
        };
        assert!(!u.is_independent(&ItemSet::from_iter([0, 1, 2])));
        assert!(!u.is_independent(&ItemSet::singleton(4)));
    }

    #[test]
    fn partition_structure_validation() {
        assert!(PartitionStructure::new(3, vec![vec![0, 1], vec![1, 2]]).is_err());
        assert!(PartitionStructure::new(3, vec![vec![0, 1]]).is_err());
        assert!(PartitionStructure::new(2, vec![vec![0, 1], vec![]]).is_err());
        assert!(PartitionStructure::new(2, vec![vec![0, 5]]).is_err());
    }

    #[test]
    fn contraction_examples() {
        let p = two_parts();
        let id = contract(&p, &ItemSet::new()).unwrap();
        for s in all_subsets(4) {
            assert_eq!(id.is_independent(&s), p.is_independent(&s));
        }
        let c = contract(&p, &ItemSet::singleton(0)).unwrap();
        assert_eq!(c.rank(), 1);
        for e in 0..4 {
            let expected = p.is_independent(&ItemSet::from_iter([0, e])) && e != 0;
            assert_eq!(c.is_independent(&ItemSet::singleton(e)), expected);
        }
        assert!(!c.is_independent(&ItemSet::singleton(1)));

        let u = UniformMatroid {
            elements: 3,
            rank: 2,
        };
        let cu = contract(u, &ItemSet::singleton(0)).unwrap();
        assert!(cu.is_independent(&ItemSet::singleton(1)));
        assert!(cu.is_independent(&ItemSet::singleton(2)));
        assert!(!cu.is_independent(&ItemSet::from_iter([1, 2])));
        assert!(matches!(
            contract(&p, &ItemSet::from_iter([0, 1])),
            Err(Error::Dependent(_))
        ));
    }

    #[test]
    fn nested_contraction_matches_joint_contraction() {
        let g = GraphicMatroid::new(
            5,
            vec![(0, 1), (1, 2), (2, 0), (2, 3), (3, 4), (4, 0), (1, 3)],
        )
        .unwrap();
        for s in all_subsets(7).filter(|s| g.is_independent(s)) {
            let cs = contract(&g, &s).unwrap();
            assert_eq!(cs.rank(), g.rank() - s.len());
            for t in all_subsets(7).filter(|t| t.is_disjoint(&s) && cs.is_independent(t)) {
                let nested = contract(&cs, &t).unwrap();
                let joint = contract(&g, &s.union(&t)).unwrap();
                assert_eq!(nested.rank(), joint.rank());
                for x in all_subsets(7) {
                    assert_eq!(nested.is_independent(&x), joint.is_independent(&x));
                }
            }
        }
    }

    #[test]
    fn greedy_examples() {
        let u = UniformMatroid {
            elements: 3,
            rank: 2,
        };
        assert_eq!(
            greedy_max_base(&u, &[5.0, 1.0, 3.0]),
            ItemSet::from_iter([0, 2])
        );
        assert_eq!(
            greedy_max_base(&u, &[1.0, 1.0, 1.0]),
            ItemSet::from_iter([0, 1])
        );
    }

    #[test]
    fn greedy_on_partitions_is_per_part_argmax() {
        // Small exhaustive sweep over weight vectors in {-1, 0, 1, 2}^6.
        let p = PartitionStructure::new(6, vec![vec![0, 3], vec![1, 4, 5], vec![2]]).unwrap();
        for code in 0..4usize.pow(6) {
            let w: Vec<f64> = (0..6)
                .map(|i| ((code / 4usize.pow(i)) % 4) as f64 - 1.0)
                .collect();
            let base = greedy_max_base(&p, &w);
            assert_eq!(base.len(), 3);
            for part in p.parts() {
                let best = part
                    .iter()
                    .copied()
                    .fold(None::<usize>, |b, e| match b {
                        Some(b) if w[b] >= w[e] => Some(b),
                        _ => Some(e),
                    })
                    .unwrap();
                assert!(base.contains(best));
            }
        }
    }

    #[test]
    fn table_matroid_checks_axioms() {
        // {2} cannot be augmented from {0, 1}
        let t = TableMatroid::new(3, vec![ItemSet::from_iter([0, 1]), ItemSet::singleton(2)])
            .unwrap_err();
        assert!(matches!(t, Error::NotMatroid(_)));
        // 0 and 2 parallel
        let par = TableMatroid::new(
            3,
            vec![ItemSet::from_iter([0, 1]), ItemSet::from_iter([1, 2])],
        );
        assert!(par.is_ok());
        let ok = TableMatroid::new(
            3,
            vec![
                ItemSet::from_iter([0, 1]),
                ItemSet::from_iter([1, 2]),
                ItemSet::from_iter([0, 2]),
            ],
        )
        .unwrap();
        let u = UniformMatroid {
            elements: 3,
            rank: 2,
        };
        for s in all_subsets(3) {
            assert_eq!(ok.is_independent(&s), u.is_independent(&s));
        }
        assert_eq!(ok.rank(), 2);
    }

    #[test]
    fn padding_makes_every_maximal_set_a_base() {
        let g = GraphicMatroid::new(4, vec![(0, 1), (1, 2), (2, 0), (2, 3)]).unwrap();
        let padded = ParallelPadding::new(&g);
        assert_eq!(padded.rank(), 3);
        for s in all_subsets(8).filter(|s| padded.is_independent(s)) {
            // every independent set extends to a base using only dummies
            let real = padded.project(&s).unwrap();
            let mut ext = s.clone();
            for u in 0..4 {
                let d = 4 + u;
                if padded.is_independent(&ext.with(d)) && !real.contains(u) {
                    ext.insert(d);
                }
            }
            assert_eq!(ext.len(), 3, "{s:?} -> {ext:?}");
        }
        let pp = PartitionPadding::new(two_parts());
        assert_eq!(pp.ground_size(), 6);
        assert!(pp.is_independent(&ItemSet::from_iter([0, 5])));
        assert!(!pp.is_independent(&ItemSet::from_iter([0, 4])));
        assert!(pp.is_dummy(4) && !pp.is_dummy(3));
    }
}
