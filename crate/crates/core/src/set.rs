//! Sets of item (or element) indices.

use core::fmt;

use smallvec::SmallVec;

const WORD: usize = 64;

/// A finite set of non-negative indices stored as a growable bitmask.
///
/// Trailing zero words are always trimmed, so two sets with the same members
/// compare equal (and hash and order identically) regardless of how they
/// were built. Sets of up to 128 indices never touch the heap.
#[derive(Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ItemSet {
    words: SmallVec<[u64; 2]>,
}

impl ItemSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Set whose members are the one bits of `mask`.
    pub fn from_mask(mask: u64) -> Self {
        let mut s = Self::new();
        if mask != 0 {
            s.words.push(mask);
        }
        s
    }

    pub fn singleton(item: usize) -> Self {
        let mut s = Self::new();
        s.insert(item);
        s
    }

    /// `{0, 1, ..., n-1}`.
    pub fn full(n: usize) -> Self {
        let mut s = Self::new();
        for i in 0..n {
            s.insert(i);
        }
        s
    }

    fn trim(&mut self) {
        while self.words.last() == Some(&0) {
            self.words.pop();
        }
    }

    pub fn contains(&self, item: usize) -> bool {
        self.words
            .get(item / WORD)
            .is_some_and(|w| w & (1u64 << (item % WORD)) != 0)
    }

    /// Adds `item`; returns whether it was newly inserted.
    pub fn insert(&mut self, item: usize) -> bool {
        let (w, b) = (item / WORD, item % WORD);
        if self.words.len() <= w {
            self.words.resize(w + 1, 0);
        }
        let fresh = self.words[w] & (1u64 << b) == 0;
        self.words[w] |= 1u64 << b;
        fresh
    }

    /// Removes `item`; returns whether it was present.
    pub fn remove(&mut self, item: usize) -> bool {
        let (w, b) = (item / WORD, item % WORD);
        match self.words.get_mut(w) {
            Some(word) if *word & (1u64 << b) != 0 => {
                *word &= !(1u64 << b);
                self.trim();
                true
            }
            _ => false,
        }
    }

    /// Copy of `self` with `item` added.
    pub fn with(&self, item: usize) -> Self {
        let mut s = self.clone();
        s.insert(item);
        s
    }

    /// Copy of `self` with `item` removed.
    pub fn without(&self, item: usize) -> Self {
        let mut s = self.clone();
        s.remove(item);
        s
    }

    pub fn union(&self, other: &Self) -> Self {
        let (long, short) = if self.words.len() >= other.words.len() {
            (self, other)
        } else {
            (other, self)
        };
        let mut s = long.clone();
        for (w, o) in s.words.iter_mut().zip(short.words.iter()) {
            *w |= o;
        }
        s
    }

    pub fn intersection(&self, other: &Self) -> Self {
        let mut s = Self {
            words: self
                .words
                .iter()
                .zip(other.words.iter())
                .map(|(a, b)| a & b)
                .collect(),
        };
        s.trim();
        s
    }

    pub fn difference(&self, other: &Self) -> Self {
        let mut s = self.clone();
        for (w, o) in s.words.iter_mut().zip(other.words.iter()) {
            *w &= !o;
        }
        s.trim();
        s
    }

    pub fn is_subset(&self, other: &Self) -> bool {
        self.words.iter().enumerate().all(|(i, w)| {
            let o = other.words.get(i).copied().unwrap_or(0);
            w & !o == 0
        })
    }

    pub fn is_disjoint(&self, other: &Self) -> bool {
        self.words
            .iter()
            .zip(other.words.iter())
            .all(|(a, b)| a & b == 0)
    }

    pub fn len(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    /// Largest member, if any.
    pub fn max_item(&self) -> Option<usize> {
        let last = *self.words.last()?;
        Some((self.words.len() - 1) * WORD + (WORD - 1 - last.leading_zeros() as usize))
    }

    /// The set as a single `u64` mask, or `None` if it holds an index ≥ 64.
    pub fn to_mask(&self) -> Option<u64> {
        match self.words.len() {
            0 => Some(0),
            1 => Some(self.words[0]),
            _ => None,
        }
    }

    /// Members in increasing order.
    pub fn iter(&self) -> Iter<'_> {
        Iter {
            words: &self.words,
            index: 0,
            current: self.words.first().copied().unwrap_or(0),
        }
    }

    /// Members strictly below `bound`.
    pub fn truncated(&self, bound: usize) -> Self {
        let mut s = Self::new();
        for i in self.iter().take_while(|&i| i < bound) {
            s.insert(i);
        }
        s
    }
}

pub struct Iter<'a> {
    words: &'a [u64],
    index: usize,
    current: u64,
}

impl Iterator for Iter<'_> {
    type Item = usize;

    fn next(&mut self) -> Option<usize> {
        loop {
            if self.current != 0 {
                let bit = self.current.trailing_zeros() as usize;
                self.current &= self.current - 1;
                return Some(self.index * WORD + bit);
            }
            self.index += 1;
            self.current = *self.words.get(self.index)?;
        }
    }
}

impl<'a> IntoIterator for &'a ItemSet {
    type Item = usize;
    type IntoIter = Iter<'a>;

    fn into_iter(self) -> Iter<'a> {
        self.iter()
    }
}

impl FromIterator<usize> for ItemSet {
    fn from_iter<I: IntoIterator<Item = usize>>(iter: I) -> Self {
        let mut s = Self::new();
        for i in iter {
            s.insert(i);
        }
        s
    }
}

impl fmt::Debug for ItemSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter()).finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec::Vec;
    use proptest::prelude::*;

    #[test]
    fn representations_compare_equal() {
        let a = ItemSet::from_mask(0b101);
        let b: ItemSet = [2, 0].into_iter().collect();
        let mut c = ItemSet::singleton(200);
        c.insert(0);
        c.insert(2);
        c.remove(200);
        assert_eq!(a, b);
        assert_eq!(a, c);
        assert_eq!(c.to_mask(), Some(0b101));
    }

    #[test]
    fn max_item_spans_words() {
        assert_eq!(ItemSet::new().max_item(), None);
        assert_eq!(ItemSet::singleton(63).max_item(), Some(63));
        assert_eq!(ItemSet::from_iter([3, 64, 130]).max_item(), Some(130));
        assert_eq!(ItemSet::singleton(64).to_mask(), None);
    }

    proptest! {
        #[test]
        fn set_algebra_matches_naive(a in proptest::collection::btree_set(0usize..150, 0..20),
                                     b in proptest::collection::btree_set(0usize..150, 0..20)) {
            let sa: ItemSet = a.iter().copied().collect();
            let sb: ItemSet = b.iter().copied().collect();
            let u: Vec<usize> = a.union(&b).copied().collect();
            let i: Vec<usize> = a.intersection(&b).copied().collect();
            let d: Vec<usize> = a.difference(&b).copied().collect();
            prop_assert_eq!(sa.union(&sb).iter().collect::<Vec<_>>(), u);
            prop_assert_eq!(sa.intersection(&sb).iter().collect::<Vec<_>>(), i);
            prop_assert_eq!(sa.difference(&sb).iter().collect::<Vec<_>>(), d.clone());
            prop_assert_eq!(sa.is_subset(&sb), a.is_subset(&b));
            prop_assert_eq!(sa.is_disjoint(&sb), a.is_disjoint(&b));
            prop_assert_eq!(sa.len(), a.len());
            // difference then union restores the superset
            prop_assert_eq!(sa.difference(&sb).union(&sa.intersection(&sb)), sa.clone());
        }
    }
}
