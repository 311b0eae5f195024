//! Exact privacy audit and Monte Carlo recoverability checks.
//!
//! Privacy is checked at the level of query supports: for every server and
//! every support set, the probability that the server sees that support must
//! be identical (as an exact rational) for all `C(K, D)` demand sets. The
//! nonzero coefficients are drawn independently of `W` given the support, so
//! this is the quantity that can leak the demand.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use num_traits::{Signed, Zero};
use rand::RngCore;

use crate::error::Result;
use crate::gf::MessageStore;
use crate::params::{int, Rational};
use crate::plan::{self, DemandSet, Plan};
use crate::prob::ProbTable;
use crate::protocol::Scheme;
use crate::subset::Subset;

/// How queries are assigned to servers.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Assignment {
    /// Uniformly random permutation (the protocol).
    UniformPermutation,
    /// `C_n` always goes to server `n`; used to show the permutation matters.
    Identity,
}

/// Distribution of the support seen by one server.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SupportDistribution(pub BTreeMap<Subset, Rational>);

impl SupportDistribution {
    pub fn prob(&self, s: Subset) -> Rational {
        self.0.get(&s).cloned().unwrap_or_else(Rational::zero)
    }

    pub fn total(&self) -> Rational {
        self.0.values().sum()
    }

    /// Total-variation distance, `½ Σ_s |p(s) - p'(s)|`.
    pub fn tv_distance(&self, other: &SupportDistribution) -> Rational {
        let keys: alloc::collections::BTreeSet<Subset> = self.0.keys().chain(other.0.keys()).copied().collect();
        let sum: Rational = keys.into_iter().map(|s| (self.prob(s) - other.prob(s)).abs()).sum();
        sum / int(2)
    }
}

/// Exact distribution of the support delivered to `server` (0-based) when
/// the demand is `w`, enumerating every table row.
pub fn support_distribution(
    plan: &Plan,
    prob: &ProbTable,
    w: &DemandSet,
    server: usize,
    assignment: Assignment,
) -> Result<SupportDistribution> {
    let n = plan.params().n();
    let share = int(n as i64).recip();
    let mut dist: BTreeMap<Subset, Rational> = BTreeMap::new();
    for row in plan.rows() {
        let p = prob.p(row.i, row.j);
        if p.is_zero() {
            continue;
        }
        let supports = plan.row_supports(w, &row)?.supports;
        match assignment {
            Assignment::UniformPermutation => {
                let weight = p * &share;
                for s in supports {
                    *dist.entry(s).or_insert_with(Rational::zero) += &weight;
                }
            }
            Assignment::Identity => {
                *dist.entry(supports[server]).or_insert_with(Rational::zero) += p;
            }
        }
    }
    Ok(SupportDistribution(dist))
}

/// Total probability of all rows of the table for `w`; one for a valid table.
pub fn row_mass(plan: &Plan, prob: &ProbTable) -> Rational {
    plan.rows().map(|row| prob.p(row.i, row.j).clone()).sum()
}

/// A support whose probability differs between two demand sets.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violation {
    pub reference: DemandSet,
    pub demand: DemandSet,
    pub server: usize,
    pub support: Subset,
    pub reference_prob: Rational,
    pub prob: Rational,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PrivacyReport {
    pub demand_sets: usize,
    pub servers: usize,
    pub max_tv: Rational,
    /// First few violations found (at most [`MAX_REPORTED`]).
    pub violations: Vec<Violation>,
    pub violation_count: usize,
}

impl PrivacyReport {
    pub fn passed(&self) -> bool {
        self.violation_count == 0 && self.max_tv.is_zero()
    }
}

pub const MAX_REPORTED: usize = 16;

/// Compares every demand set's support distribution against the first
/// demand set's, for every server.
pub fn privacy_check(plan: &Plan, prob: &ProbTable, assignment: Assignment) -> Result<PrivacyReport> {
    let params = plan.params();
    let demands = DemandSet::all(params);
    let mut report = PrivacyReport {
        demand_sets: demands.len(),
        servers: params.n(),
        max_tv: Rational::zero(),
        violations: Vec::new(),
        violation_count: 0,
    };
    for server in 0..params.n() {
        let reference = &demands[0];
        let base = support_distribution(plan, prob, reference, server, assignment)?;
        for w in &demands[1..] {
            let dist = support_distribution(plan, prob, w, server, assignment)?;
            let tv = base.tv_distance(&dist);
            if tv > report.max_tv {
                report.max_tv = tv;
            }
            let keys: alloc::collections::BTreeSet<Subset> = base.0.keys().chain(dist.0.keys()).copied().collect();
            for s in keys {
                let (a, b) = (base.prob(s), dist.prob(s));
                if a != b {
                    report.violation_count += 1;
                    if report.violations.len() < MAX_REPORTED {
                        report.violations.push(Violation {
                            reference: reference.clone(),
                            demand: w.clone(),
                            server,
                            support: s,
                            reference_prob: a,
                            prob: b,
                        });
                    }
                }
            }
        }
    }
    Ok(report)
}

/// Evenness result for one sub-block size.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EvennessRecord {
    pub j: usize,
    pub l: u64,
    pub m: u64,
    pub collection: Vec<Subset>,
    pub lex_first_even: bool,
    pub even: bool,
}

/// Chooses and verifies the base collection of every sub-block for demand
/// size `d`, on the demand set `{1, ..., d}`.
pub fn evenness_audit(d: usize) -> Result<Vec<EvennessRecord>> {
    let w = DemandSet::canonical(d);
    let (l, m) = crate::params::lj_mj(d);
    (1..=d)
        .map(|j| {
            let c = plan::choose_t_collection(&w, j)?;
            let even = plan::verify_evenness(&w, j, &c.subsets).even;
            Ok(EvennessRecord {
                j,
                l: l[j - 1],
                m: m[j - 1],
                collection: c.subsets,
                lex_first_even: c.lex_first_even,
                even,
            })
        })
        .collect()
}

/// Outcome of repeated random rounds.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RecoverabilityReport {
    pub trials: u64,
    pub successes: u64,
    /// Sum and sum of squares of the number of answering servers.
    pub answers_sum: u64,
    pub answers_sq_sum: u64,
    pub download_elements: u64,
    /// `N - Σ_j l_j P_{0,j}`.
    pub expected_answers: Rational,
}

impl RecoverabilityReport {
    pub fn mean_answers(&self) -> Rational {
        Rational::new(self.answers_sum.into(), self.trials.into())
    }

    /// Unbiased sample variance of the answering-server count.
    pub fn variance(&self) -> Rational {
        if self.trials < 2 {
            return Rational::zero();
        }
        let n = int(self.trials);
        let s1 = int(self.answers_sum);
        let s2 = int(self.answers_sq_sum);
        (s2 - &s1 * &s1 / &n) / (n - int(1))
    }

    /// `|mean - expected| <= z · SE`, evaluated exactly by squaring.
    pub fn within_standard_errors(&self, z: u32) -> bool {
        let diff = self.mean_answers() - &self.expected_answers;
        let lhs = &diff * &diff * int(self.trials);
        lhs <= self.variance() * int(z * z)
    }

    pub fn all_recovered(&self) -> bool {
        self.successes == self.trials
    }
}

/// Runs `trials` rounds, each with a fresh random store and a uniformly
/// random demand set, and checks the recovered messages against the store.
pub fn recoverability_check<R: RngCore + ?Sized>(
    scheme: &Scheme,
    trials: u64,
    rng: &mut R,
) -> Result<RecoverabilityReport> {
    let params = scheme.params();
    let demands = DemandSet::all(params);
    let mut report = RecoverabilityReport {
        trials,
        successes: 0,
        answers_sum: 0,
        answers_sq_sum: 0,
        download_elements: 0,
        expected_answers: scheme.prob().expected_answers(),
    };
    for _ in 0..trials {
        let store = MessageStore::random(*scheme.field(), params.k(), params.m(), rng);
        let w = &demands[(rng.next_u64() % demands.len() as u64) as usize];
        let t = scheme.run_round(w, &store, rng)?;
        if t.matches(&store) {
            report.successes += 1;
        }
        let a = t.answering_servers() as u64;
        report.answers_sum += a;
        report.answers_sq_sum += a * a;
        report.download_elements += t.download_elements as u64;
    }
    Ok(report)
}
