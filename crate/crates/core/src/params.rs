//! Instance parameters and the exact combinatorial quantities the scheme is
//! built from.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::gf;
use crate::subset::MAX_INDEX;

/// Exact rational number, always in lowest terms with a positive denominator.
pub type Rational = BigRational;

pub fn rational(n: i64, d: i64) -> Rational {
    Rational::new(BigInt::from(n), BigInt::from(d))
}

pub fn int(n: impl Into<BigInt>) -> Rational {
    Rational::from_integer(n.into())
}

/// One protocol instance: `K` messages of `m` field elements each over
/// `GF(q)`, a demand of `D` messages, and `N = D + 1` servers.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Params {
    k: usize,
    d: usize,
    q: u64,
    m: usize,
}

impl Params {
    pub fn new(k: usize, d: usize, q: u64, m: usize) -> Result<Self> {
        if k < 2 {
            return Err(Error::InvalidParams(format!("K = {k} must exceed 1")));
        }
        if k > MAX_INDEX {
            return Err(Error::InvalidParams(format!("K = {k} exceeds the supported maximum {MAX_INDEX}")));
        }
        if d < 2 || d > k {
            return Err(Error::InvalidParams(format!("D = {d} must satisfy 1 < D <= K = {k}")));
        }
        if m == 0 {
            return Err(Error::InvalidParams("message length m must be at least 1".into()));
        }
        if !gf::is_prime(q) {
            return Err(Error::NotPrime(q));
        }
        if q <= d as u64 {
            return Err(Error::FieldTooSmall { q, d });
        }
        Ok(Params { k, d, q, m })
    }

    /// Parameters over the smallest prime field larger than `D`.
    pub fn with_default_field(k: usize, d: usize, m: usize) -> Result<Self> {
        Self::new(k, d, gf::smallest_prime_above(d as u64), m)
    }

    /// Number of messages `K`.
    pub fn k(&self) -> usize {
        self.k
    }

    /// Demand size `D`.
    pub fn d(&self) -> usize {
        self.d
    }

    /// Number of servers, always `D + 1`.
    pub fn n(&self) -> usize {
        self.d + 1
    }

    pub fn q(&self) -> u64 {
        self.q
    }

    /// Message length in field elements.
    pub fn m(&self) -> usize {
        self.m
    }

    /// Number of interference messages, `K - D`.
    pub fn excess(&self) -> usize {
        self.k - self.d
    }
}

impl fmt::Display for Params {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "K={} D={} N={} q={} m={}", self.k, self.d, self.n(), self.q, self.m)
    }
}

/// `C(n, r)`, zero when `r < 0` or `r > n`.
pub fn binomial(n: u64, r: i64) -> BigUint {
    if r < 0 || r as u64 > n {
        return BigUint::zero();
    }
    let r = (r as u64).min(n - r as u64);
    let mut acc = BigUint::one();
    for t in 0..r {
        acc = acc * (n - t) / (t + 1);
    }
    acc
}

/// The weights `l_j = lcm(C(D,j), D) / D` and `m_j = D l_j / C(D,j)` for
/// `j = 1..=D`, returned as `(l, m)` with index `j - 1`.
pub fn lj_mj(d: usize) -> (Vec<u64>, Vec<u64>) {
    assert!(d >= 1, "demand size must be positive");
    let dd = BigUint::from(d);
    let mut l = Vec::with_capacity(d);
    let mut m = Vec::with_capacity(d);
    for j in 1..=d {
        let c = binomial(d as u64, j as i64);
        let lj = c.lcm(&dd) / &dd;
        let mj = &dd * &lj / &c;
        l.push(lj.to_u64().expect("l_j fits in u64 for D <= 63"));
        m.push(mj.to_u64().expect("m_j fits in u64 for D <= 63"));
    }
    (l, m)
}

/// Dense row-major matrix of rationals.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RationalMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Rational>,
}

impl RationalMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        RationalMatrix { rows, cols, data: vec![Rational::zero(); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut out = Self::zeros(n, n);
        for t in 0..n {
            out.set(t, t, Rational::one());
        }
        out
    }

    pub fn from_rows(rows: Vec<Vec<Rational>>) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::Dimension("ragged matrix rows".into()));
        }
        let n = rows.len();
        Ok(RationalMatrix { rows: n, cols, data: rows.into_iter().flatten().collect() })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> &Rational {
        &self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: Rational) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[Rational] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn add(&self, other: &RationalMatrix) -> RationalMatrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect();
        RationalMatrix { rows: self.rows, cols: self.cols, data }
    }

    /// Row vector times matrix, `vᵀ A`.
    pub fn left_mul(&self, v: &[Rational]) -> Vec<Rational> {
        assert_eq!(v.len(), self.rows);
        (0..self.cols)
            .map(|c| {
                v.iter()
                    .enumerate()
                    .filter(|(_, x)| !x.is_zero())
                    .fold(Rational::zero(), |acc, (r, x)| acc + x * self.get(r, c))
            })
            .collect()
    }

    /// Matrix times column vector, `A v`.
    pub fn mul_vec(&self, v: &[Rational]) -> Vec<Rational> {
        assert_eq!(v.len(), self.cols);
        (0..self.rows).map(|r| self.row(r).iter().zip(v).fold(Rational::zero(), |acc, (a, x)| acc + a * x)).collect()
    }
}

impl fmt::Display for RationalMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for r in 0..self.rows {
            f.write_str("[")?;
            for (c, x) in self.row(r).iter().enumerate() {
                if c > 0 {
                    f.write_str(", ")?;
                }
                write!(f, "{x}")?;
            }
            f.write_str("]\n")?;
        }
        Ok(())
    }
}

/// `L = (l_1, ..., l_D)` as rationals.
pub fn l_vector(d: usize) -> Vec<Rational> {
    lj_mj(d).0.into_iter().map(int).collect()
}

/// The `D x D` matrix with `(l_1, ..., l_D)` in its first row,
/// `m_h / m_{h+1}` on the sub-diagonal, and zeros elsewhere.
pub fn build_m(d: usize) -> RationalMatrix {
    let (l, m) = lj_mj(d);
    let mut out = RationalMatrix::zeros(d, d);
    for (c, &lj) in l.iter().enumerate() {
        out.set(0, c, int(lj));
    }
    for h in 1..d {
        out.set(h, h - 1, Rational::new(m[h - 1].into(), m[h].into()));
    }
    out
}

/// `vᵀ A^e` by `e` successive row-vector products.
pub fn left_power(v: &[Rational], a: &RationalMatrix, e: usize) -> Vec<Rational> {
    (0..e).fold(v.to_vec(), |acc, _| a.left_mul(&acc))
}

/// `Fᵀ = Lᵀ M^(K-D)` and `Gᵀ = Lᵀ (I + M)^(K-D)`.
pub fn compute_fg(params: &Params) -> (Vec<Rational>, Vec<Rational>) {
    let d = params.d();
    let l = l_vector(d);
    let m = build_m(d);
    let shifted = RationalMatrix::identity(d).add(&m);
    let f = left_power(&l, &m, params.excess());
    let g = left_power(&l, &shifted, params.excess());
    (f, g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;

    fn rv(xs: &[(i64, i64)]) -> Vec<Rational> {
        xs.iter().map(|&(n, d)| rational(n, d)).collect()
    }

    #[test]
    fn binomial_examples() {
        assert_eq!(binomial(4, 2), BigUint::from(6u8));
        assert_eq!(binomial(2, 0), BigUint::one());
        assert_eq!(binomial(5, 7), BigUint::zero());
        assert_eq!(binomial(5, -1), BigUint::zero());
        assert_eq!(binomial(60, 30).to_string(), "118264581564861424");
    }

    #[test]
    fn weights_examples() {
        assert_eq!(lj_mj(2), (vec![1, 1], vec![1, 2]));
        assert_eq!(lj_mj(1), (vec![1], vec![1]));
        let (l, m) = lj_mj(4);
        assert_eq!((l[1], m[1]), (3, 2));
        assert_eq!(lj_mj(3), (vec![1, 1, 1], vec![1, 1, 3]));
    }

    #[test]
    fn weights_identity() {
        for d in 1..=8 {
            let (l, m) = lj_mj(d);
            for j in 1..=d {
                let lhs = BigUint::from(l[j - 1] * d as u64);
                assert_eq!(lhs, BigUint::from(m[j - 1]) * binomial(d as u64, j as i64), "D={d} j={j}");
            }
        }
    }

    #[test]
    fn m_matrix_examples() {
        let two = RationalMatrix::from_rows(vec![rv(&[(1, 1), (1, 1)]), rv(&[(1, 2), (0, 1)])]).unwrap();
        assert_eq!(build_m(2), two);
        assert_eq!(build_m(1), RationalMatrix::from_rows(vec![rv(&[(1, 1)])]).unwrap());
        // m = (1, 1, 3) for D = 3
        let three = RationalMatrix::from_rows(vec![
            rv(&[(1, 1), (1, 1), (1, 1)]),
            rv(&[(1, 1), (0, 1), (0, 1)]),
            rv(&[(0, 1), (1, 3), (0, 1)]),
        ])
        .unwrap();
        assert_eq!(build_m(3), three);
    }

    #[test]
    fn fg_examples() {
        let (f, g) = compute_fg(&Params::new(4, 2, 3, 1).unwrap());
        assert_eq!(f, rv(&[(2, 1), (3, 2)]));
        assert_eq!(g, rv(&[(6, 1), (9, 2)]));
        let (f, g) = compute_fg(&Params::new(5, 2, 3, 1).unwrap());
        assert_eq!(f, rv(&[(11, 4), (2, 1)]));
        assert_eq!(g, rv(&[(57, 4), (21, 2)]));
        for d in 2..=6 {
            let (f, g) = compute_fg(&Params::with_default_field(d, d, 1).unwrap());
            assert_eq!(f, l_vector(d));
            assert_eq!(g, l_vector(d));
        }
    }

    #[test]
    fn params_validation() {
        assert!(Params::new(4, 2, 3, 1).is_ok());
        assert!(Params::new(4, 4, 5, 1).is_ok());
        assert!(matches!(Params::new(1, 1, 3, 1), Err(Error::InvalidParams(_))));
        assert!(matches!(Params::new(4, 1, 3, 1), Err(Error::InvalidParams(_))));
        assert!(matches!(Params::new(4, 5, 7, 1), Err(Error::InvalidParams(_))));
        assert!(matches!(Params::new(4, 2, 4, 1), Err(Error::NotPrime(4))));
        assert!(matches!(Params::new(4, 3, 3, 1), Err(Error::FieldTooSmall { .. })));
        assert!(matches!(Params::new(4, 2, 3, 0), Err(Error::InvalidParams(_))));
        assert!(matches!(Params::new(64, 2, 3, 1), Err(Error::InvalidParams(_))));
        assert_eq!(Params::with_default_field(9, 4, 1).unwrap().q(), 5);
        assert_eq!(Params::with_default_field(4, 2, 1).unwrap().n(), 3);
    }
}
