//! The query-plan table for a demand set `W`.
//!
//! Rows are indexed by `(i, k, j, l)`: sub-table `i` (how many interference
//! messages), block `k` (which `i`-subset of `[K] \ W`), sub-block `j` (how
//! many demand messages each non-first server sees) and row `l` (which base
//! `j`-subset of `W`). A row gives the supports of the `N` query vectors:
//! `S_1 = R` and `S_{1+h} = R ∪ shift(T_l, h)` for `h = 1..=D`.
//!
//! Rows are built on demand from their index; the full table is never
//! materialized.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec::Vec;
use core::fmt;

use num_bigint::BigUint;
use num_integer::Integer;
use num_traits::{One, ToPrimitive, Zero};
use rand::RngCore;

use crate::error::{Error, Result};
use crate::params::{binomial, lj_mj, Params};
use crate::prob::ProbTable;
use crate::subset::{self, Subset};

/// The demand's index set, kept sorted: `w_0 < w_1 < ... < w_{D-1}`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DemandSet {
    set: Subset,
    members: Vec<usize>,
}

impl DemandSet {
    pub fn new(params: &Params, indices: impl IntoIterator<Item = usize>) -> Result<Self> {
        let mut members: Vec<usize> = indices.into_iter().collect();
        members.sort_unstable();
        members.dedup();
        if members.len() != params.d() {
            return Err(Error::InvalidDemand(format!("expected {} distinct indices, got {:?}", params.d(), members)));
        }
        if members.iter().any(|&t| t == 0 || t > params.k()) {
            return Err(Error::InvalidDemand(format!("indices must lie in 1..={}", params.k())));
        }
        Ok(DemandSet { set: members.iter().copied().collect(), members })
    }

    /// `{1, ..., d}`.
    pub fn canonical(d: usize) -> Self {
        DemandSet { set: Subset::range(d), members: (1..=d).collect() }
    }

    pub fn from_subset(params: &Params, set: Subset) -> Result<Self> {
        Self::new(params, set.iter())
    }

    /// Every demand set of size `D` in `[K]`, in lexicographic order.
    pub fn all(params: &Params) -> Vec<DemandSet> {
        let items: Vec<usize> = (1..=params.k()).collect();
        subset::combinations(&items, params.d())
            .into_iter()
            .map(|s| DemandSet { set: s, members: s.to_vec() })
            .collect()
    }

    pub fn set(&self) -> Subset {
        self.set
    }

    pub fn members(&self) -> &[usize] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// Position of `t` in the sorted order, if present.
    pub fn position(&self, t: usize) -> Option<usize> {
        self.members.binary_search(&t).ok()
    }

    /// The complement `[K] \ W`, sorted.
    pub fn complement(&self, k: usize) -> Vec<usize> {
        (1..=k).filter(|t| !self.set.contains(*t)).collect()
    }
}

impl fmt::Display for DemandSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(&self.set, f)
    }
}

/// Row index `(i, k, j, l)` with `k` and `l` 1-based.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RowId {
    pub i: usize,
    pub k: u64,
    pub j: usize,
    pub l: u64,
}

impl RowId {
    pub fn new(i: usize, k: u64, j: usize, l: u64) -> Self {
        RowId { i, k, j, l }
    }
}

impl fmt::Display for RowId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{},{},{})", self.i, self.k, self.j, self.l)
    }
}

/// The supports `(S_1, ..., S_N)` of one table row.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct SupportRow {
    pub supports: Vec<Subset>,
}

/// The `k`-th (1-based) `i`-subset of `[K] \ W` in lexicographic order.
pub fn r_subset(params: &Params, w: &DemandSet, i: usize, k: u64) -> Result<Subset> {
    if i > params.excess() || k == 0 {
        return Err(Error::InvalidRow(format!("no block {k} in sub-table {i}")));
    }
    subset::unrank_combination(&w.complement(params.k()), i, (k - 1) as u128)
        .ok_or_else(|| Error::InvalidRow(format!("block {k} exceeds C({}, {i})", params.excess())))
}

/// Advances the position of every member of `t` within `W` by `h - 1`
/// (cyclically): `w_r -> w_{(r + h - 1) mod D}`.
pub fn shift_subset(w: &DemandSet, t: Subset, h: usize) -> Subset {
    let d = w.len();
    t.iter()
        .map(|x| {
            let r = w.position(x).expect("shifted subset must lie in W");
            w.members()[(r + h - 1) % d]
        })
        .collect()
}

/// Multiplicity of each `j`-subset of `W` among the `D` cyclic shifts of
/// every member of a collection.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Evenness {
    pub multiplicities: BTreeMap<Subset, u64>,
    pub expected: u64,
    pub even: bool,
}

/// Checks that every `j`-subset of `W` is hit exactly `m_j` times by
/// `shift(T_l, h)` over all `(l, h) ∈ [l_j] × [D]`.
pub fn verify_evenness(w: &DemandSet, j: usize, collection: &[Subset]) -> Evenness {
    let d = w.len();
    let expected = lj_mj(d).1[j - 1];
    let mut multiplicities = BTreeMap::new();
    for &t in collection {
        for h in 1..=d {
            *multiplicities.entry(shift_subset(w, t, h)).or_insert(0) += 1;
        }
    }
    let all = subset::combinations(w.members(), j);
    let even = multiplicities.len() == all.len() && all.iter().all(|s| multiplicities.get(s) == Some(&expected));
    Evenness { multiplicities, expected, even }
}

/// A base collection `T_1, ..., T_{l_j}` of `j`-subsets of `W`, all
/// containing `w = min W`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TCollection {
    pub subsets: Vec<Subset>,
    /// Whether the first `l_j` candidates in lexicographic order were already
    /// evenly distributed. When false, `subsets` is the lexicographically
    /// first collection that is.
    pub lex_first_even: bool,
}

const SEARCH_BUDGET: usize = 1 << 22;

/// Lexicographically first collection of `l_j` distinct `j`-subsets of `W`
/// containing `min W` whose cyclic shifts cover every `j`-subset exactly
/// `m_j` times.
pub fn choose_t_collection(w: &DemandSet, j: usize) -> Result<TCollection> {
    let d = w.len();
    if j == 0 || j > d {
        return Err(Error::InvalidRow(format!("sub-block {j} outside 1..={d}")));
    }
    let (l, m) = lj_mj(d);
    let (need, cap) = (l[j - 1] as usize, m[j - 1]);
    let anchor = w.members()[0];
    let candidates: Vec<Subset> = subset::combinations(&w.members()[1..], j - 1)
        .into_iter()
        .map(|s| s.union(Subset::singleton(anchor)))
        .collect();

    let lex_first_even = candidates.len() >= need && verify_evenness(w, j, &candidates[..need]).even;
    if lex_first_even {
        return Ok(TCollection { subsets: candidates[..need].to_vec(), lex_first_even });
    }

    struct Search<'a> {
        w: &'a DemandSet,
        candidates: &'a [Subset],
        need: usize,
        cap: u64,
        counts: BTreeMap<Subset, u64>,
        chosen: Vec<Subset>,
        budget: usize,
    }

    impl Search<'_> {
        fn run(&mut self, start: usize) -> bool {
            if self.chosen.len() == self.need {
                return true;
            }
            for idx in start..self.candidates.len() {
                if self.candidates.len() - idx < self.need - self.chosen.len() || self.budget == 0 {
                    return false;
                }
                self.budget -= 1;
                let t = self.candidates[idx];
                let shifts: Vec<Subset> = (1..=self.w.len()).map(|h| shift_subset(self.w, t, h)).collect();
                let mut fits = true;
                let mut added = BTreeMap::new();
                for s in &shifts {
                    *added.entry(*s).or_insert(0u64) += 1;
                }
                for (s, c) in &added {
                    if self.counts.get(s).copied().unwrap_or(0) + c > self.cap {
                        fits = false;
                    }
                }
                if !fits {
                    continue;
                }
                for (s, c) in &added {
                    *self.counts.entry(*s).or_insert(0) += c;
                }
                self.chosen.push(t);
                if self.run(idx + 1) {
                    return true;
                }
                self.chosen.pop();
                for (s, c) in &added {
                    *self.counts.get_mut(s).expect("present") -= c;
                }
            }
            false
        }
    }

    let mut search = Search {
        w,
        candidates: &candidates,
        need,
        cap,
        counts: BTreeMap::new(),
        chosen: Vec::new(),
        budget: SEARCH_BUDGET,
    };
    if search.run(0) && verify_evenness(w, j, &search.chosen).even {
        Ok(TCollection { subsets: search.chosen, lex_first_even })
    } else {
        Err(Error::NoEvenCollection { d, j })
    }
}

/// Structure of the query-plan table for one parameter set: the weights and
/// the base collections, computed once on the canonical demand set
/// `{1, ..., D}` and transported to any `W` by position.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Plan {
    params: Params,
    l: Vec<u64>,
    m: Vec<u64>,
    /// Per sub-block `j` (index `j - 1`), base subsets over positions `1..=D`.
    collections: Vec<TCollection>,
}

impl Plan {
    pub fn new(params: &Params) -> Result<Self> {
        let d = params.d();
        let canonical = DemandSet::canonical(d);
        let collections = (1..=d).map(|j| choose_t_collection(&canonical, j)).collect::<Result<Vec<_>>>()?;
        let (l, m) = lj_mj(d);
        Ok(Plan { params: *params, l, m, collections })
    }

    pub fn params(&self) -> &Params {
        &self.params
    }

    pub fn l(&self) -> &[u64] {
        &self.l
    }

    pub fn m(&self) -> &[u64] {
        &self.m
    }

    /// Base collection of sub-block `j` for the canonical demand `{1..D}`.
    pub fn canonical_collection(&self, j: usize) -> &TCollection {
        &self.collections[j - 1]
    }

    /// `T^(j)_l` for demand `W`.
    pub fn base_subset(&self, w: &DemandSet, j: usize, l: u64) -> Subset {
        let pattern = self.collections[j - 1].subsets[(l - 1) as usize];
        pattern.iter().map(|p| w.members()[p - 1]).collect()
    }

    /// `T^(j)_{l,h}` for demand `W`.
    pub fn shifted_subset(&self, w: &DemandSet, j: usize, l: u64, h: usize) -> Subset {
        shift_subset(w, self.base_subset(w, j, l), h)
    }

    /// `k_i = C(K - D, i)`.
    pub fn blocks(&self, i: usize) -> u64 {
        binomial(self.params.excess() as u64, i as i64).to_u64().expect("block count fits in u64")
    }

    pub fn check_row(&self, row: &RowId) -> Result<()> {
        let ok = row.i <= self.params.excess()
            && (1..=self.blocks(row.i)).contains(&row.k)
            && (1..=self.params.d()).contains(&row.j)
            && (1..=self.l[row.j - 1]).contains(&row.l);
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidRow(format!("{row} is not a row of the table for {}", self.params)))
        }
    }

    pub fn row_supports(&self, w: &DemandSet, row: &RowId) -> Result<SupportRow> {
        self.check_row(row)?;
        let r = r_subset(&self.params, w, row.i, row.k)?;
        let mut supports = Vec::with_capacity(self.params.n());
        supports.push(r);
        for h in 1..=self.params.d() {
            supports.push(r.union(self.shifted_subset(w, row.j, row.l, h)));
        }
        Ok(SupportRow { supports })
    }

    /// Every row index in table order (sub-table, block, sub-block, row).
    pub fn rows(&self) -> impl Iterator<Item = RowId> + '_ {
        (0..=self.params.excess()).flat_map(move |i| {
            (1..=self.blocks(i)).flat_map(move |k| {
                (1..=self.params.d()).flat_map(move |j| (1..=self.l[j - 1]).map(move |l| RowId { i, k, j, l }))
            })
        })
    }

    /// `2^(K-D) Σ_j l_j`.
    pub fn row_count(&self) -> u128 {
        (1u128 << self.params.excess()) * self.l.iter().map(|&x| x as u128).sum::<u128>()
    }
}

/// Exact sampler over row indices: row `(i,k,j,l)` is drawn with
/// probability `P_{i,j}`.
///
/// All probabilities are scaled to integers over their common denominator;
/// a uniform integer below that denominator (by rejection on random 64-bit
/// words) selects the row.
#[derive(Clone, Debug)]
pub struct RowSampler {
    denominator: BigUint,
    groups: Vec<Group>,
    l: Vec<u64>,
}

#[derive(Clone, Debug)]
struct Group {
    i: usize,
    j: usize,
    per_row: BigUint,
    end: BigUint,
}

impl RowSampler {
    pub fn new(plan: &Plan, prob: &ProbTable) -> Result<Self> {
        let params = plan.params();
        let mut denominator = BigUint::one();
        for i in 0..=params.excess() {
            for p in prob.row(i) {
                let den = p.denom().to_biguint().expect("denominators are positive");
                denominator = denominator.lcm(&den);
            }
        }
        let mut groups = Vec::new();
        let mut end = BigUint::zero();
        for i in 0..=params.excess() {
            for j in 1..=params.d() {
                let p = prob.p(i, j);
                if p.is_zero() {
                    continue;
                }
                let scaled = p * num_rational::BigRational::from_integer(denominator.clone().into());
                let per_row = scaled.to_integer().to_biguint().ok_or_else(|| Error::ProbabilityOutOfRange {
                    i,
                    j,
                    value: alloc::string::ToString::to_string(p),
                })?;
                end += &per_row * BigUint::from(plan.blocks(i)) * BigUint::from(plan.l()[j - 1]);
                groups.push(Group { i, j, per_row, end: end.clone() });
            }
        }
        if end != denominator {
            return Err(Error::InvalidParams(format!("row probabilities sum to {end}/{denominator}, not 1")));
        }
        Ok(RowSampler { denominator, groups, l: plan.l().to_vec() })
    }

    pub fn denominator(&self) -> &BigUint {
        &self.denominator
    }

    /// Maps an integer in `[0, denominator)` to its row.
    pub fn row_at(&self, u: &BigUint) -> RowId {
        assert!(u < &self.denominator);
        let idx = self.groups.partition_point(|g| &g.end <= u);
        let g = &self.groups[idx];
        let start = if idx == 0 { BigUint::zero() } else { self.groups[idx - 1].end.clone() };
        let offset = (u - start) / &g.per_row;
        let offset = offset.to_u64().expect("row offset fits in u64");
        let lj = self.l[g.j - 1];
        RowId { i: g.i, k: offset / lj + 1, j: g.j, l: offset % lj + 1 }
    }

    pub fn sample<R: RngCore + ?Sized>(&self, rng: &mut R) -> RowId {
        self.row_at(&uniform_below(&self.denominator, rng))
    }
}

/// Uniform integer in `[0, bound)` by rejection sampling.
pub fn uniform_below<R: RngCore + ?Sized>(bound: &BigUint, rng: &mut R) -> BigUint {
    assert!(!bound.is_zero());
    let bits = bound.bits();
    let words = bits.div_ceil(64) as usize;
    let top_bits = bits - 64 * (words as u64 - 1);
    let top_mask = if top_bits == 64 { u64::MAX } else { (1u64 << top_bits) - 1 };
    loop {
        let mut digits = Vec::with_capacity(2 * words);
        for w in 0..words {
            let mut x = rng.next_u64();
            if w == words - 1 {
                x &= top_mask;
            }
            digits.push(x as u32);
            digits.push((x >> 32) as u32);
        }
        let candidate = BigUint::new(digits);
        if &candidate < bound {
            return candidate;
        }
    }
}
