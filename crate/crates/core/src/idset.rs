//! Integer id sets over a bounded universe `[0, bound)`.
//!
//! Dense bitsets are used up to `DENSE_LIMIT`; beyond that a sorted id array.
//! Every counting operation takes an explicit upper bound so comparisons can
//! be restricted to a common prefix of the universe without copying.

use crate::error::{Error, Result};

pub const DENSE_LIMIT: u64 = 1 << 31;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum IdSet {
    Dense {
        words: Vec<u64>,
        len: u64,
        bound: u64,
    },
    Sparse {
        ids: Vec<u64>,
        bound: u64,
    },
}

/// Accumulates strictly increasing ids.
#[derive(Debug, Default)]
pub struct IdSetBuilder {
    ids: Vec<u64>,
}

impl IdSetBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, id: u64) {
        self.ids.push(id);
    }

    pub fn build(self, bound: u64) -> Result<IdSet> {
        IdSet::from_sorted(self.ids, bound)
    }
}

impl IdSet {
    pub fn empty(bound: u64) -> Self {
        Self::from_sorted(Vec::new(), bound).expect("empty set is valid")
    }

    /// `ids` must be strictly increasing and below `bound`.
    pub fn from_sorted(ids: Vec<u64>, bound: u64) -> Result<Self> {
        check_sorted(&ids, bound)?;
        if bound <= DENSE_LIMIT {
            Ok(Self::dense_from_sorted(&ids, bound))
        } else {
            Ok(IdSet::Sparse { ids, bound })
        }
    }

    /// Builds the sorted-array form regardless of the universe size.
    pub fn sparse_from_sorted(ids: Vec<u64>, bound: u64) -> Result<Self> {
        check_sorted(&ids, bound)?;
        Ok(IdSet::Sparse { ids, bound })
    }

    fn dense_from_sorted(ids: &[u64], bound: u64) -> Self {
        let mut words = vec![0u64; bound.div_ceil(64) as usize];
        for &id in ids {
            words[(id / 64) as usize] |= 1 << (id % 64);
        }
        IdSet::Dense {
            words,
            len: ids.len() as u64,
            bound,
        }
    }

    pub fn bound(&self) -> u64 {
        match self {
            IdSet::Dense { bound, .. } | IdSet::Sparse { bound, .. } => *bound,
        }
    }

    pub fn len(&self) -> u64 {
        match self {
            IdSet::Dense { len, .. } => *len,
            IdSet::Sparse { ids, .. } => ids.len() as u64,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_dense(&self) -> bool {
        matches!(self, IdSet::Dense { .. })
    }

    pub fn contains(&self, id: u64) -> bool {
        match self {
            IdSet::Dense { words, bound, .. } => {
                id < *bound && words[(id / 64) as usize] >> (id % 64) & 1 == 1
            }
            IdSet::Sparse { ids, .. } => ids.binary_search(&id).is_ok(),
        }
    }

    pub fn iter(&self) -> Iter<'_> {
        match self {
            IdSet::Dense { words, .. } => Iter::Dense {
                words,
                word: 0,
                cur: words.first().copied().unwrap_or(0),
            },
            IdSet::Sparse { ids, .. } => Iter::Sparse(ids.iter()),
        }
    }

    /// Number of members strictly below `limit`.
    pub fn count_below(&self, limit: u64) -> u64 {
        match self {
            IdSet::Dense { words, bound, len } => {
                if limit >= *bound {
                    return *len;
                }
                dense_prefix_count(words, limit, |w, _| w)
            }
            IdSet::Sparse { ids, .. } => ids.partition_point(|&x| x < limit) as u64,
        }
    }

    /// `|self ∩ other|` restricted to ids below `limit`.
    pub fn intersection_count_below(&self, other: &IdSet, limit: u64) -> u64 {
        let limit = limit.min(self.bound()).min(other.bound());
        match (self, other) {
            (IdSet::Dense { words: a, .. }, IdSet::Dense { words: b, .. }) => {
                dense_prefix_count(a, limit, |w, i| w & b[i])
            }
            (IdSet::Sparse { ids: a, .. }, IdSet::Sparse { ids: b, .. }) => {
                let a = &a[..a.partition_point(|&x| x < limit)];
                let b = &b[..b.partition_point(|&x| x < limit)];
                merge_count(a, b)
            }
            (IdSet::Sparse { ids, .. }, dense) | (dense, IdSet::Sparse { ids, .. }) => {
                ids.iter()
                    .take_while(|&&x| x < limit)
                    .filter(|&&x| dense.contains(x))
                    .count() as u64
            }
        }
    }
}

fn check_sorted(ids: &[u64], bound: u64) -> Result<()> {
    if let Some(w) = ids.windows(2).find(|w| w[0] >= w[1]) {
        return Err(Error::param(format!(
            "ids not strictly increasing: {} then {}",
            w[0], w[1]
        )));
    }
    match ids.last() {
        Some(&last) if last >= bound => Err(Error::param(format!(
            "id {last} outside universe of {bound} sequences"
        ))),
        _ => Ok(()),
    }
}

fn dense_prefix_count(words: &[u64], limit: u64, f: impl Fn(u64, usize) -> u64) -> u64 {
    let full = (limit / 64) as usize;
    let mut n: u64 = (0..full)
        .map(|i| u64::from(f(words[i], i).count_ones()))
        .sum();
    let rem = limit % 64;
    if rem > 0 {
        n += u64::from((f(words[full], full) & ((1u64 << rem) - 1)).count_ones());
    }
    n
}

fn merge_count(a: &[u64], b: &[u64]) -> u64 {
    let (mut i, mut j, mut n) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                n += 1;
                i += 1;
                j += 1;
            }
        }
    }
    n
}

pub enum Iter<'a> {
    Dense {
        words: &'a [u64],
        word: usize,
        cur: u64,
    },
    Sparse(std::slice::Iter<'a, u64>),
}

impl Iterator for Iter<'_> {
    type Item = u64;

    fn next(&mut self) -> Option<u64> {
        match self {
            Iter::Dense { words, word, cur } => loop {
                if *cur != 0 {
                    let bit = cur.trailing_zeros() as u64;
                    *cur &= *cur - 1;
                    return Some(*word as u64 * 64 + bit);
                }
                *word += 1;
                *cur = *words.get(*word)?;
            },
            Iter::Sparse(it) => it.next().copied(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::collections::BTreeSet;

    fn both(ids: &BTreeSet<u64>, bound: u64) -> (IdSet, IdSet) {
        let v: Vec<u64> = ids.iter().copied().collect();
        (
            IdSet::from_sorted(v.clone(), bound).unwrap(),
            IdSet::sparse_from_sorted(v, bound).unwrap(),
        )
    }

    #[test]
    fn rejects_unsorted_and_out_of_bound() {
        assert!(IdSet::from_sorted(vec![3, 3], 10).is_err());
        assert!(IdSet::from_sorted(vec![4, 2], 10).is_err());
        assert!(IdSet::from_sorted(vec![10], 10).is_err());
        assert!(IdSet::empty(0).is_empty());
    }

    #[test]
    fn representation_switch() {
        assert!(IdSet::from_sorted(vec![1], DENSE_LIMIT).unwrap().is_dense());
        let big = IdSet::from_sorted(vec![1, DENSE_LIMIT + 5], DENSE_LIMIT + 10).unwrap();
        assert!(!big.is_dense());
        assert_eq!(big.count_below(DENSE_LIMIT), 1);
    }

    proptest! {
        #[test]
        fn counts_match_btreeset(
            a in proptest::collection::btree_set(0u64..700, 0..200),
            b in proptest::collection::btree_set(0u64..700, 0..200),
            limit in 0u64..800,
        ) {
            let bound = 700;
            let (ad, asp) = both(&a, bound);
            let (bd, bsp) = both(&b, bound);
            let expect_a = a.iter().filter(|&&x| x < limit).count() as u64;
            let expect_ab = a.intersection(&b).filter(|&&x| x < limit).count() as u64;
            prop_assert_eq!(ad.count_below(limit), expect_a);
            prop_assert_eq!(asp.count_below(limit), expect_a);
            for (x, y) in [(&ad, &bd), (&ad, &bsp), (&asp, &bd), (&asp, &bsp)] {
                prop_assert_eq!(x.intersection_count_below(y, limit), expect_ab);
            }
            prop_assert_eq!(ad.iter().collect::<Vec<_>>(), a.iter().copied().collect::<Vec<_>>());
            prop_assert_eq!(asp.iter().collect::<Vec<_>>(), a.iter().copied().collect::<Vec<_>>());
            for x in 0..bound {
                prop_assert_eq!(ad.contains(x), a.contains(&x));
            }
        }
    }
}
