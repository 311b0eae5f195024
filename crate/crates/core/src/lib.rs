//! Scalar-linear multi-message private information retrieval (MPIR) for
//! `N = D + 1` non-colluding servers.
//!
//! A user wants `D` of the `K` messages replicated on every server. Each
//! server receives one coefficient vector over a prime field and answers with
//! the corresponding linear combination of whole messages (no
//! subpacketization). The query supports are drawn from a randomized table
//! whose row probabilities are chosen so that the support seen by any single
//! server has the same distribution for every demand set, while the expected
//! number of answering servers is minimized.
//!
//! The crate is `no_std` (it needs `alloc`) and is organized bottom-up:
//!
//! - [`params`]: instance parameters, the integer weights `l_j`, `m_j`, the
//!   recurrence matrix `M` and the vectors `F`, `G`, all in exact rationals.
//! - [`prob`]: the row-probability table, the achievable rate and the
//!   capacity formulas.
//! - [`plan`]: the query-plan table (rows, cyclic shifts, evenness) and exact
//!   row sampling.
//! - [`gf`]: prime-field arithmetic and small dense linear algebra.
//! - [`protocol`]: query generation, server answers, recovery.
//! - [`audit`]: exhaustive exact privacy verification and Monte Carlo
//!   recoverability checks.
//!
//! Message indices are 1-based (`1..=K`) everywhere, matching the usual
//! notation; coefficient vectors are plain length-`K` arrays where message `t`
//! lives at position `t - 1`.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod audit;
pub mod error;
pub mod gf;
pub mod params;
pub mod plan;
pub mod prob;
pub mod protocol;
pub mod subset;

pub use error::{Error, Result};
pub use params::{Params, Rational, RationalMatrix};
pub use plan::{DemandSet, Plan, RowId, SupportRow};
pub use prob::{ProbTable, RateReport};
pub use protocol::{Answer, QuerySet, Scheme, Transcript};
pub use subset::Subset;
