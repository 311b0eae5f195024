//! Small index sets over the message indices `1..=63`, stored as a bitmask.

use alloc::vec::Vec;
use core::fmt;

/// Largest supported message index.
pub const MAX_INDEX: usize = 63;

/// A set of 1-based message indices. Bit `t` is set iff `t` is a member.
#[derive(Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Subset(u64);

impl Subset {
    pub const EMPTY: Subset = Subset(0);

    pub fn from_bits(bits: u64) -> Self {
        debug_assert_eq!(bits & 1, 0, "index 0 is not a message index");
        Subset(bits)
    }

    pub fn bits(self) -> u64 {
        self.0
    }

    /// `{1, 2, ..., n}`.
    pub fn range(n: usize) -> Self {
        assert!(n <= MAX_INDEX);
        Subset(((1u128 << (n + 1)) - 2) as u64)
    }

    pub fn singleton(t: usize) -> Self {
        assert!((1..=MAX_INDEX).contains(&t), "index {t} out of range");
        Subset(1 << t)
    }

    pub fn contains(self, t: usize) -> bool {
        t <= MAX_INDEX && self.0 >> t & 1 == 1
    }

    pub fn insert(&mut self, t: usize) {
        *self = self.union(Subset::singleton(t));
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn union(self, other: Subset) -> Subset {
        Subset(self.0 | other.0)
    }

    pub fn intersection(self, other: Subset) -> Subset {
        Subset(self.0 & other.0)
    }

    pub fn difference(self, other: Subset) -> Subset {
        Subset(self.0 & !other.0)
    }

    pub fn is_subset(self, other: Subset) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn is_disjoint(self, other: Subset) -> bool {
        self.0 & other.0 == 0
    }

    pub fn last(self) -> Option<usize> {
        (self.0 != 0).then(|| 63 - self.0.leading_zeros() as usize)
    }

    /// Members in increasing order.
    pub fn iter(self) -> Iter {
        Iter(self.0)
    }

    pub fn to_vec(self) -> Vec<usize> {
        self.iter().collect()
    }
}

impl FromIterator<usize> for Subset {
    fn from_iter<I: IntoIterator<Item = usize>>(iter: I) -> Self {
        let mut s = Subset::EMPTY;
        for t in iter {
            s.insert(t);
        }
        s
    }
}

impl<const N: usize> From<[usize; N]> for Subset {
    fn from(items: [usize; N]) -> Self {
        items.into_iter().collect()
    }
}

pub struct Iter(u64);

impl Iterator for Iter {
    type Item = usize;

    fn next(&mut self) -> Option<usize> {
        if self.0 == 0 {
            return None;
        }
        let t = self.0.trailing_zeros() as usize;
        self.0 &= self.0 - 1;
        Some(t)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let n = self.0.count_ones() as usize;
        (n, Some(n))
    }
}

impl ExactSizeIterator for Iter {}

impl fmt::Display for Subset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (n, t) in self.iter().enumerate() {
            if n > 0 {
                f.write_str(",")?;
            }
            write!(f, "{t}")?;
        }
        f.write_str("}")
    }
}

impl fmt::Debug for Subset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

/// Visits every `r`-subset of `items` (taken in the given order) in
/// lexicographic order of positions.
pub fn for_each_combination(items: &[usize], r: usize, mut visit: impl FnMut(Subset)) {
    let n = items.len();
    if r > n {
        return;
    }
    let mut idx: Vec<usize> = (0..r).collect();
    loop {
        visit(idx.iter().map(|&p| items[p]).collect());
        // advance the rightmost position that still has room
        let Some(pos) = (0..r).rev().find(|&p| idx[p] < n - r + p) else {
            return;
        };
        idx[pos] += 1;
        for t in pos + 1..r {
            idx[t] = idx[t - 1] + 1;
        }
    }
}

/// All `r`-subsets of `items` in lexicographic order.
pub fn combinations(items: &[usize], r: usize) -> Vec<Subset> {
    let mut out = Vec::new();
    for_each_combination(items, r, |s| out.push(s));
    out
}

/// The `rank`-th (0-based) `r`-subset of `items` in lexicographic order, or
/// `None` when `rank >= C(len, r)`.
pub fn unrank_combination(items: &[usize], r: usize, mut rank: u128) -> Option<Subset> {
    let n = items.len();
    if r > n || rank >= binom_u128(n, r) {
        return None;
    }
    let mut out = Subset::EMPTY;
    let mut start = 0;
    for slot in 0..r {
        let remaining = r - slot - 1;
        let mut p = start;
        loop {
            // number of completions when items[p] is taken at this slot
            let c = binom_u128(n - p - 1, remaining);
            if rank < c {
                break;
            }
            rank -= c;
            p += 1;
        }
        out.insert(items[p]);
        start = p + 1;
    }
    Some(out)
}

pub(crate) fn binom_u128(n: usize, r: usize) -> u128 {
    if r > n {
        return 0;
    }
    let r = r.min(n - r);
    let mut acc: u128 = 1;
    for t in 0..r {
        acc = acc * (n - t) as u128 / (t + 1) as u128;
    }
    acc
}
