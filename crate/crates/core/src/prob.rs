//! Row probabilities, achievable rate and capacity formulas.
//!
//! Privacy forces the per-sub-table probability vectors to satisfy
//! `P_{i-1} = M P_i`, so the whole table is fixed by its last row `P_{K-D}`.
//! That row solves a linear program with one equality constraint
//! (`Gᵀ P = 1`) and box constraints, whose optimum puts all mass on the
//! column maximizing `f_j / g_j`.

use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};
use crate::params::{self, binomial, build_m, compute_fg, int, Params, Rational};

/// `argmax_j f_j / g_j`, ties broken toward the smallest `j` (1-based).
pub fn solve_opt(f: &[Rational], g: &[Rational]) -> (usize, Rational) {
    assert_eq!(f.len(), g.len());
    assert!(!f.is_empty());
    let mut best = (1, &f[0] / &g[0]);
    for j in 2..=f.len() {
        assert!(g[j - 1].is_positive(), "g_{j} must be positive");
        let ratio = &f[j - 1] / &g[j - 1];
        if ratio > best.1 {
            best = (j, ratio);
        }
    }
    best
}

/// The probabilities `P_{i,j}` (`0 <= i <= K-D`, `1 <= j <= D`) shared by
/// every row in sub-block `j` of every block of sub-table `i`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ProbTable {
    params: Params,
    l: Vec<u64>,
    rows: Vec<Vec<Rational>>,
    j_star: usize,
}

impl ProbTable {
    pub fn build(params: &Params) -> Result<Self> {
        let d = params.d();
        let (f, g) = compute_fg(params);
        let (j_star, _) = solve_opt(&f, &g);
        let top = g[j_star - 1].recip();
        if top > Rational::one() {
            return Err(Error::ProbabilityOutOfRange { i: params.excess(), j: j_star, value: top.to_string() });
        }
        let mut last = vec![Rational::zero(); d];
        last[j_star - 1] = top;

        let m = build_m(d);
        let mut rows = vec![last];
        for _ in 0..params.excess() {
            let next = m.mul_vec(rows.last().expect("nonempty"));
            rows.push(next);
        }
        rows.reverse();

        let table = ProbTable { params: *params, l: params::lj_mj(d).0, rows, j_star };
        for i in 0..=params.excess() {
            for j in 1..=d {
                let p = table.p(i, j);
                if p.is_negative() || *p > Rational::one() {
                    return Err(Error::ProbabilityOutOfRange { i, j, value: p.to_string() });
                }
            }
        }
        Ok(table)
    }

    pub fn params(&self) -> &Params {
        &self.params
    }

    /// `P_{i,j}` with `j` 1-based.
    pub fn p(&self, i: usize, j: usize) -> &Rational {
        &self.rows[i][j - 1]
    }

    /// `P_i = (P_{i,1}, ..., P_{i,D})`.
    pub fn row(&self, i: usize) -> &[Rational] {
        &self.rows[i]
    }

    pub fn j_star(&self) -> usize {
        self.j_star
    }

    pub fn l(&self) -> &[u64] {
        &self.l
    }

    /// `Σ_j l_j P_{i,j}`: probability that the sampled row lies in a given
    /// block of sub-table `i`.
    pub fn block_mass(&self, i: usize) -> Rational {
        self.rows[i].iter().zip(&self.l).map(|(p, &l)| p * int(l)).sum()
    }

    /// `Σ_i k_i Σ_j l_j P_{i,j}`; equals one for a valid table.
    pub fn total_mass(&self) -> Rational {
        (0..=self.params.excess())
            .map(|i| {
                self.block_mass(i) * Rational::from_integer(binomial(self.params.excess() as u64, i as i64).into())
            })
            .sum()
    }

    /// `Σ_j l_j P_{0,j}`: probability that the first query is the zero vector.
    pub fn empty_mass(&self) -> Rational {
        self.block_mass(0)
    }

    /// Expected number of answering servers, `N - Σ_j l_j P_{0,j}`.
    pub fn expected_answers(&self) -> Rational {
        int(self.params.n() as i64) - self.empty_mass()
    }

    /// Rate from the table, `D / (N - Σ_j l_j P_{0,j})`.
    pub fn rate(&self) -> Rational {
        int(self.params.d() as i64) / self.expected_answers()
    }

    /// Copy with `P_{i,j}` shifted by `delta`, rescaled so the total row
    /// mass is one again. Used to check that audits detect tampering.
    pub fn perturbed(&self, i: usize, j: usize, delta: &Rational) -> Result<ProbTable> {
        let mut out = self.clone();
        out.rows[i][j - 1] += delta;
        let total = out.total_mass();
        if !total.is_positive() {
            return Err(Error::InvalidParams("perturbation leaves no probability mass".into()));
        }
        for row in out.rows.iter_mut() {
            for p in row.iter_mut() {
                *p /= &total;
                if p.is_negative() || *p > Rational::one() {
                    return Err(Error::ProbabilityOutOfRange { i, j, value: p.to_string() });
                }
            }
        }
        Ok(out)
    }
}

/// `D / (N - max_j f_j / g_j)`.
pub fn achievable_rate(params: &Params) -> Rational {
    let (f, g) = compute_fg(params);
    let (_, best) = solve_opt(&f, &g);
    int(params.d() as i64) / (int(params.n() as i64) - best)
}

/// `1 / (1 + (K - D) / (D N))`; a capacity bound when `2D >= K`.
pub fn bound_small_excess(params: &Params) -> Rational {
    let (k, d, n) = (params.k() as i64, params.d() as i64, params.n() as i64);
    (Rational::one() + Rational::new((k - d).into(), (d * n).into())).recip()
}

/// `1 / ((1 - N^-L) / (1 - 1/N) + (K/D - L) N^-L)` with `L = floor(K/D)`;
/// a capacity bound when `2D <= K`.
pub fn bound_large_excess(params: &Params) -> Rational {
    let (k, d, n) = (params.k(), params.d(), params.n());
    let whole = k / d;
    let n_pow = Rational::from_integer(BigInt::from(n).pow(whole as u32));
    let inv_n = int(n as i64).recip();
    let geometric = (Rational::one() - n_pow.recip()) / (Rational::one() - inv_n);
    let frac = Rational::new(BigInt::from(k % d), BigInt::from(d));
    (geometric + frac / n_pow).recip()
}

/// Upper bound on the capacity: the small-excess formula when `D >= K/2`,
/// the geometric formula when `D <= K/2` (both agree at `D = K/2`).
pub fn capacity_upper_bound(params: &Params) -> Rational {
    let (k, d) = (params.k(), params.d());
    if 2 * d > k {
        bound_small_excess(params)
    } else if 2 * d < k {
        bound_large_excess(params)
    } else {
        let a = bound_small_excess(params);
        assert_eq!(a, bound_large_excess(params), "capacity bounds disagree at D = K/2");
        a
    }
}

/// `(1 - 1/N) / (1 - 1/N^(K/D))`, defined only when `D | K`.
pub fn capacity_divisible(params: &Params) -> Result<Rational> {
    let (k, d, n) = (params.k(), params.d(), params.n());
    if k % d != 0 {
        return Err(Error::NotDivisible { k, d });
    }
    let blocks = (k / d) as u32;
    let inv_n = int(n as i64).recip();
    let n_pow = Rational::from_integer(BigInt::from(n).pow(blocks));
    let c = (Rational::one() - &inv_n) / (Rational::one() - n_pow.recip());
    // D / (N - (D+1)^(1-L))
    let alt = int(d as i64) / (int(n as i64) - n_pow.recip() * int(n as i64));
    assert_eq!(c, alt, "capacity forms disagree");
    Ok(c)
}

/// Rate, bound and download summary for one instance.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RateReport {
    pub rate: Rational,
    pub upper_bound: Rational,
    pub capacity_if_divisible: Option<Rational>,
    pub gap: Rational,
    pub expected_download_factor: Rational,
}

impl RateReport {
    pub fn new(params: &Params) -> Result<Self> {
        let table = ProbTable::build(params)?;
        Ok(Self::from_table(&table))
    }

    pub fn from_table(table: &ProbTable) -> Self {
        let params = table.params();
        let rate = achievable_rate(params);
        let upper_bound = capacity_upper_bound(params);
        let gap = &upper_bound - &rate;
        RateReport {
            capacity_if_divisible: capacity_divisible(params).ok(),
            expected_download_factor: table.expected_answers(),
            gap,
            rate,
            upper_bound,
        }
    }
}
