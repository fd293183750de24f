//! Arrival orders.

use alloc::{vec, vec::Vec};

use crate::error::{invalid, Result};

/// Checks that `order` lists each of `0..m` exactly once.
pub fn check_permutation(order: &[usize], m: usize) -> Result<()> {
    if order.len() != m {
        return Err(invalid("order length differs from the item count"));
    }
    let mut seen = vec![false; m];
    for &i in order {
        match seen.get_mut(i) {
            Some(s) if !*s => *s = true,
            _ => return Err(invalid("order is not a permutation of the items")),
        }
    }
    Ok(())
}

/// Advances to the next permutation in lexicographic order; false after the last.
pub fn next_permutation(p: &mut [usize]) -> bool {
    let Some(i) = p.windows(2).rposition(|w| w[0] < w[1]) else {
        return false;
    };
    let j = p
        .iter()
        .rposition(|&x| x > p[i])
        .expect("pivot has a successor");
    p.swap(i, j);
    p[i + 1..].reverse();
    true
}

/// All `m!` orders, lexicographically.
pub fn all_permutations(m: usize) -> Vec<Vec<usize>> {
    let mut p: Vec<usize> = (0..m).collect();
    let mut out = vec![p.clone()];
    while next_permutation(&mut p) {
        out.push(p.clone());
    }
    out
}

pub fn factorial(m: usize) -> u64 {
    (1..=m as u64).product()
}
