//! Prime-field arithmetic and the small dense linear algebra used for query
//! vectors and recovery.

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, RngCore};

use crate::error::{Error, Result};
use crate::subset::Subset;

/// Deterministic Miller-Rabin for 64-bit integers.
pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    for p in [2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        if n.is_multiple_of(p) {
            return n == p;
        }
    }
    let mut d = n - 1;
    let mut s = 0;
    while d.is_multiple_of(2) {
        d /= 2;
        s += 1;
    }
    'witness: for a in [2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        let mut x = pow_mod(a, d, n);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..s {
            x = mul_mod(x, x, n);
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

pub fn smallest_prime_above(n: u64) -> u64 {
    (n + 1..).find(|&c| is_prime(c)).expect("a prime exists above every u64 of interest")
}

fn mul_mod(a: u64, b: u64, q: u64) -> u64 {
    (a as u128 * b as u128 % q as u128) as u64
}

fn pow_mod(mut base: u64, mut exp: u64, q: u64) -> u64 {
    let mut acc = 1 % q;
    base %= q;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = mul_mod(acc, base, q);
        }
        base = mul_mod(base, base, q);
        exp >>= 1;
    }
    acc
}

/// `GF(q)` for a prime `q`. Elements are plain `u64` values in `[0, q)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Field {
    q: u64,
}

impl Field {
    pub fn new(q: u64) -> Result<Self> {
        if is_prime(q) {
            Ok(Field { q })
        } else {
            Err(Error::NotPrime(q))
        }
    }

    pub fn order(&self) -> u64 {
        self.q
    }

    pub fn contains(&self, a: u64) -> bool {
        a < self.q
    }

    pub fn add(&self, a: u64, b: u64) -> u64 {
        ((a as u128 + b as u128) % self.q as u128) as u64
    }

    pub fn sub(&self, a: u64, b: u64) -> u64 {
        self.add(a, self.neg(b))
    }

    pub fn neg(&self, a: u64) -> u64 {
        if a == 0 {
            0
        } else {
            self.q - a
        }
    }

    pub fn mul(&self, a: u64, b: u64) -> u64 {
        mul_mod(a, b, self.q)
    }

    pub fn pow(&self, a: u64, e: u64) -> u64 {
        pow_mod(a, e, self.q)
    }

    pub fn inv(&self, a: u64) -> Result<u64> {
        if a.is_multiple_of(self.q) {
            return Err(Error::ZeroInverse);
        }
        Ok(self.pow(a, self.q - 2))
    }

    /// Uniform element of `GF(q)^×`.
    pub fn random_nonzero<R: RngCore + ?Sized>(&self, rng: &mut R) -> u64 {
        rng.gen_range(1..self.q)
    }

    pub fn random<R: RngCore + ?Sized>(&self, rng: &mut R) -> u64 {
        rng.gen_range(0..self.q)
    }

    /// `acc += c * x` element-wise.
    pub fn axpy(&self, acc: &mut [u64], c: u64, x: &[u64]) {
        for (a, &v) in acc.iter_mut().zip(x) {
            *a = self.add(*a, self.mul(c, v));
        }
    }
}

/// A length-`K` coefficient vector; entry `t - 1` multiplies message `t`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct CoeffVector(pub Vec<u64>);

impl CoeffVector {
    pub fn zeros(k: usize) -> Self {
        CoeffVector(vec![0; k])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&c| c == 0)
    }

    /// Message indices with a nonzero coefficient.
    pub fn support(&self) -> Subset {
        self.0.iter().enumerate().filter(|(_, &c)| c != 0).map(|(t, _)| t + 1).collect()
    }

    pub fn coeff(&self, message: usize) -> u64 {
        self.0[message - 1]
    }

    pub fn add(&self, field: &Field, other: &CoeffVector) -> CoeffVector {
        CoeffVector(self.0.iter().zip(&other.0).map(|(&a, &b)| field.add(a, b)).collect())
    }

    /// Nonzero entries drawn uniformly from `GF(q)^×` on exactly `support`.
    pub fn random_on<R: RngCore + ?Sized>(field: &Field, k: usize, support: Subset, rng: &mut R) -> Self {
        let mut out = Self::zeros(k);
        for t in support.iter() {
            out.0[t - 1] = field.random_nonzero(rng);
        }
        out
    }
}

/// Gaussian elimination on the augmented system `[A | B]` where `A` is
/// square; returns `X` with `A X = B` (one column of `X` per column of `B`).
fn eliminate(field: &Field, a: &[Vec<u64>], b: &[Vec<u64>]) -> Result<Vec<Vec<u64>>> {
    let n = a.len();
    if a.iter().any(|r| r.len() != n) || b.len() != n {
        return Err(Error::Dimension("solve expects a square system".into()));
    }
    let width = b.first().map_or(0, Vec::len);
    let mut rows: Vec<Vec<u64>> =
        a.iter().zip(b).map(|(ar, br)| ar.iter().chain(br).map(|&x| x % field.order()).collect()).collect();
    for col in 0..n {
        let pivot = (col..n).find(|&r| rows[r][col] != 0).ok_or(Error::Singular)?;
        rows.swap(col, pivot);
        let inv = field.inv(rows[col][col])?;
        for x in rows[col].iter_mut() {
            *x = field.mul(*x, inv);
        }
        let pivot_row = rows[col].clone();
        for (r, row) in rows.iter_mut().enumerate() {
            if r != col && row[col] != 0 {
                let factor = field.neg(row[col]);
                field.axpy(row, factor, &pivot_row);
            }
        }
    }
    Ok(rows.into_iter().map(|r| r[n..n + width].to_vec()).collect())
}

/// Solves `A x = b` over `GF(q)` for an invertible `A`.
pub fn solve_square(field: &Field, a: &[Vec<u64>], b: &[u64]) -> Result<Vec<u64>> {
    let rhs: Vec<Vec<u64>> = b.iter().map(|&x| vec![x]).collect();
    Ok(eliminate(field, a, &rhs)?.into_iter().map(|r| r[0]).collect())
}

/// Solves `A X = B` for all columns of `B` at once.
pub fn solve_many(field: &Field, a: &[Vec<u64>], b: &[Vec<u64>]) -> Result<Vec<Vec<u64>>> {
    eliminate(field, a, b)
}

/// Rank of a (possibly rectangular) matrix given by rows.
pub fn rank(field: &Field, rows: &[Vec<u64>]) -> usize {
    let mut rows: Vec<Vec<u64>> = rows.to_vec();
    let cols = rows.first().map_or(0, Vec::len);
    let mut rank = 0;
    for col in 0..cols {
        let Some(pivot) = (rank..rows.len()).find(|&r| rows[r][col] != 0) else {
            continue;
        };
        rows.swap(rank, pivot);
        let inv = field.inv(rows[rank][col]).expect("pivot is nonzero");
        let pivot_row: Vec<u64> = rows[rank].iter().map(|&x| field.mul(x, inv)).collect();
        for row in rows.iter_mut().skip(rank + 1) {
            if row[col] != 0 {
                let factor = field.neg(row[col]);
                field.axpy(row, factor, &pivot_row);
            }
        }
        rank += 1;
    }
    rank
}

pub const FULL_RANK_ATTEMPTS: usize = 1000;

/// Draws one vector per support (length `k`, uniform nonzero entries on the
/// support) and resamples the whole stack until it has full row rank.
pub fn random_full_rank_v<R: RngCore + ?Sized>(
    field: &Field,
    k: usize,
    supports: &[Subset],
    rng: &mut R,
) -> Result<Vec<CoeffVector>> {
    if supports.iter().any(|s| s.is_empty() || s.last().is_some_and(|t| t > k)) {
        return Err(Error::Dimension("supports must be nonempty subsets of [K]".into()));
    }
    for _ in 0..FULL_RANK_ATTEMPTS {
        let v: Vec<CoeffVector> = supports.iter().map(|&s| CoeffVector::random_on(field, k, s, rng)).collect();
        let rows: Vec<Vec<u64>> = v.iter().map(|c| c.0.clone()).collect();
        if rank(field, &rows) == supports.len() {
            return Ok(v);
        }
    }
    Err(Error::RankExhausted { attempts: FULL_RANK_ATTEMPTS, supports: supports.to_vec() })
}

/// `K` messages of `m` field elements each, identical at every server.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MessageStore {
    field: Field,
    m: usize,
    messages: Vec<Vec<u64>>,
}

impl MessageStore {
    pub fn new(field: Field, m: usize, messages: Vec<Vec<u64>>) -> Result<Self> {
        if messages.iter().any(|x| x.len() != m) {
            return Err(Error::Dimension(alloc::format!("every message must have length {m}")));
        }
        if messages.iter().flatten().any(|&x| !field.contains(x)) {
            return Err(Error::Dimension(alloc::format!("message element outside GF({})", field.order())));
        }
        Ok(MessageStore { field, m, messages })
    }

    pub fn random<R: RngCore + ?Sized>(field: Field, k: usize, m: usize, rng: &mut R) -> Self {
        let messages = (0..k).map(|_| (0..m).map(|_| field.random(rng)).collect()).collect();
        MessageStore { field, m, messages }
    }

    pub fn field(&self) -> &Field {
        &self.field
    }

    pub fn k(&self) -> usize {
        self.messages.len()
    }

    pub fn m(&self) -> usize {
        self.m
    }

    /// Message `t` (1-based).
    pub fn message(&self, t: usize) -> &[u64] {
        &self.messages[t - 1]
    }

    pub fn messages(&self) -> &[Vec<u64>] {
        &self.messages
    }

    pub fn set_message(&mut self, t: usize, value: Vec<u64>) -> Result<()> {
        if value.len() != self.m || value.iter().any(|&x| !self.field.contains(x)) {
            return Err(Error::Dimension("replacement message does not fit the store".into()));
        }
        self.messages[t - 1] = value;
        Ok(())
    }

    /// `Σ c_t X_t` over the support of `coeffs`.
    pub fn combine(&self, coeffs: &CoeffVector) -> Vec<u64> {
        let mut acc = vec![0; self.m];
        for t in coeffs.support().iter() {
            self.field.axpy(&mut acc, coeffs.coeff(t), self.message(t));
        }
        acc
    }
}
