//! The three protocol steps: query generation (user), answering (servers)
//! and recovery (user).

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::RngCore;

use crate::error::{Error, Result};
use crate::gf::{self, CoeffVector, Field, MessageStore};
use crate::params::Params;
use crate::plan::{DemandSet, Plan, RowId, RowSampler};
use crate::prob::ProbTable;

/// One round's queries. `queries[n]` is `C_{n+1}` and is sent to server
/// `permutation[n]` (servers are numbered `0..N`).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QuerySet {
    pub demand: DemandSet,
    pub row: RowId,
    pub permutation: Vec<usize>,
    pub queries: Vec<CoeffVector>,
    pub u: CoeffVector,
    pub v: Vec<CoeffVector>,
}

impl QuerySet {
    /// The query delivered to `server`.
    pub fn for_server(&self, server: usize) -> &CoeffVector {
        let n = self.permutation.iter().position(|&s| s == server).expect("permutation covers every server");
        &self.queries[n]
    }

    /// Queries indexed by server.
    pub fn by_server(&self) -> Vec<CoeffVector> {
        let mut out = vec![CoeffVector(Vec::new()); self.queries.len()];
        for (n, &s) in self.permutation.iter().enumerate() {
            out[s] = self.queries[n].clone();
        }
        out
    }
}

/// A server's reply: nothing for an all-zero query, otherwise one
/// message-length linear combination.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Answer {
    Empty,
    Combination(Vec<u64>),
}

impl Answer {
    pub fn is_empty(&self) -> bool {
        matches!(self, Answer::Empty)
    }
}

/// Server side of the protocol. Sees only the coefficient vector.
pub fn server_answer(store: &MessageStore, query: &CoeffVector) -> Answer {
    if query.is_zero() {
        Answer::Empty
    } else {
        Answer::Combination(store.combine(query))
    }
}

/// Everything observable in one in-memory round.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Transcript {
    pub demand: DemandSet,
    pub query_set: QuerySet,
    /// Indexed by server.
    pub answers: Vec<Answer>,
    pub recovered: Vec<Vec<u64>>,
    /// Field elements downloaded: `m` per non-empty answer.
    pub download_elements: usize,
}

impl Transcript {
    pub fn answering_servers(&self) -> usize {
        self.answers.iter().filter(|a| !a.is_empty()).count()
    }

    /// Whether the recovered messages equal `X_W` in `store`.
    pub fn matches(&self, store: &MessageStore) -> bool {
        self.demand.members().iter().zip(&self.recovered).all(|(&t, x)| store.message(t) == x.as_slice())
    }
}

/// User-side state for one parameter set: plan, probabilities and sampler.
#[derive(Clone, Debug)]
pub struct Scheme {
    params: Params,
    field: Field,
    plan: Plan,
    prob: ProbTable,
    sampler: RowSampler,
}

impl Scheme {
    pub fn new(params: &Params) -> Result<Self> {
        let plan = Plan::new(params)?;
        let prob = ProbTable::build(params)?;
        let sampler = RowSampler::new(&plan, &prob)?;
        Ok(Scheme { params: *params, field: Field::new(params.q())?, plan, prob, sampler })
    }

    pub fn params(&self) -> &Params {
        &self.params
    }

    pub fn field(&self) -> &Field {
        &self.field
    }

    pub fn plan(&self) -> &Plan {
        &self.plan
    }

    pub fn prob(&self) -> &ProbTable {
        &self.prob
    }

    pub fn sampler(&self) -> &RowSampler {
        &self.sampler
    }

    pub fn demand(&self, indices: impl IntoIterator<Item = usize>) -> Result<DemandSet> {
        DemandSet::new(&self.params, indices)
    }

    /// Builds the queries for a given row. Draws `U`, then `V`, then the
    /// server permutation from `rng`.
    pub fn query_set_for_row<R: RngCore + ?Sized>(&self, w: &DemandSet, row: RowId, rng: &mut R) -> Result<QuerySet> {
        let k = self.params.k();
        let supports = self.plan.row_supports(w, &row)?;
        let u = CoeffVector::random_on(&self.field, k, supports.supports[0], rng);
        let v_supports: Vec<_> = (1..=self.params.d()).map(|h| self.plan.shifted_subset(w, row.j, row.l, h)).collect();
        let v = gf::random_full_rank_v(&self.field, k, &v_supports, rng)?;
        let mut queries = Vec::with_capacity(self.params.n());
        queries.push(u.clone());
        queries.extend(v.iter().map(|vh| u.add(&self.field, vh)));
        let mut permutation: Vec<usize> = (0..self.params.n()).collect();
        permutation.shuffle(rng);
        Ok(QuerySet { demand: w.clone(), row, permutation, queries, u, v })
    }

    /// Step 1: sample a row, build `C_1 = U`, `C_{1+h} = U + V_h`, and
    /// assign them to servers by a uniform permutation.
    pub fn make_query_set<R: RngCore + ?Sized>(&self, w: &DemandSet, rng: &mut R) -> Result<QuerySet> {
        let row = self.sampler.sample(rng);
        self.query_set_for_row(w, row, rng)
    }

    /// Step 3: `Z_h = Y_{h+1} - Y_1`, then solve the `D x D` system given by
    /// `V` restricted to the demand columns. `answers` is indexed by server.
    pub fn recover(&self, query_set: &QuerySet, answers: &[Answer]) -> Result<Vec<Vec<u64>>> {
        let (n, d, m) = (self.params.n(), self.params.d(), self.params.m());
        if answers.len() != n {
            return Err(Error::Dimension(format!("expected {n} answers, got {}", answers.len())));
        }
        let f = &self.field;
        let y: Vec<Vec<u64>> = query_set
            .permutation
            .iter()
            .map(|&server| match &answers[server] {
                Answer::Empty => Ok(vec![0; m]),
                Answer::Combination(x) if x.len() == m && x.iter().all(|&e| f.contains(e)) => Ok(x.clone()),
                Answer::Combination(x) => {
                    Err(Error::Dimension(format!("server {server} answered {} elements, expected {m}", x.len())))
                }
            })
            .collect::<Result<_>>()?;
        let z: Vec<Vec<u64>> = (1..=d).map(|h| y[h].iter().zip(&y[0]).map(|(&a, &b)| f.sub(a, b)).collect()).collect();
        let demand = query_set.demand.members();
        let a: Vec<Vec<u64>> = query_set.v.iter().map(|vh| demand.iter().map(|&t| vh.coeff(t)).collect()).collect();
        let x = gf::solve_many(f, &a, &z)?;
        Ok(x)
    }

    /// Runs all three steps against an in-memory store.
    pub fn run_round<R: RngCore + ?Sized>(
        &self,
        w: &DemandSet,
        store: &MessageStore,
        rng: &mut R,
    ) -> Result<Transcript> {
        let query_set = self.make_query_set(w, rng)?;
        let answers: Vec<Answer> = query_set.by_server().iter().map(|q| server_answer(store, q)).collect();
        self.transcript(query_set, answers)
    }

    /// Recovers and packages a round whose answers were obtained elsewhere.
    pub fn transcript(&self, query_set: QuerySet, answers: Vec<Answer>) -> Result<Transcript> {
        let recovered = self.recover(&query_set, &answers)?;
        let download_elements = answers.iter().filter(|a| !a.is_empty()).count() * self.params.m();
        Ok(Transcript { demand: query_set.demand.clone(), query_set, answers, recovered, download_elements })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::subset::Subset;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn scheme(k: usize, d: usize, m: usize) -> Scheme {
        Scheme::new(&Params::with_default_field(k, d, m).unwrap()).unwrap()
    }

    #[test]
    fn worked_example_queries_and_recovery() {
        let s = scheme(4, 2, 3);
        let f = *s.field();
        let w = s.demand([1, 2]).unwrap();
        let u = CoeffVector(vec![0, 0, 1, 2]);
        let v = vec![CoeffVector(vec![2, 0, 0, 0]), CoeffVector(vec![0, 1, 0, 0])];
        let queries: Vec<CoeffVector> = core::iter::once(u.clone()).chain(v.iter().map(|x| u.add(&f, x))).collect();
        assert_eq!(queries[1].0, [2, 0, 1, 2]);
        assert_eq!(queries[2].0, [0, 1, 1, 2]);

        let store = MessageStore::new(f, 3, vec![vec![1, 2, 0], vec![2, 2, 1], vec![0, 1, 1], vec![1, 1, 2]]).unwrap();
        let qs = QuerySet { demand: w, row: RowId::new(2, 1, 1, 1), permutation: vec![2, 0, 1], queries, u, v };
        let answers: Vec<Answer> = qs.by_server().iter().map(|q| server_answer(&store, q)).collect();
        // Y_1 = X3 + 2 X4 went to server 2
        let mut expected_y1 = store.message(3).to_vec();
        f.axpy(&mut expected_y1, 2, store.message(4));
        assert_eq!(answers[2], Answer::Combination(expected_y1));
        let t = s.transcript(qs, answers).unwrap();
        assert_eq!(t.recovered, [store.message(1).to_vec(), store.message(2).to_vec()]);
        assert_eq!(t.download_elements, 9);
    }

    #[test]
    fn answers_basic() {
        let f = Field::new(3).unwrap();
        let store = MessageStore::new(f, 2, vec![vec![1, 2], vec![0, 1]]).unwrap();
        assert_eq!(server_answer(&store, &CoeffVector(vec![0, 0])), Answer::Empty);
        assert_eq!(server_answer(&store, &CoeffVector(vec![1, 0])), Answer::Combination(vec![1, 2]));
    }

    #[test]
    fn empty_first_query_means_one_silent_server() {
        let s = scheme(5, 2, 4);
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let store = MessageStore::random(*s.field(), 5, 4, &mut rng);
        let w = s.demand([2, 5]).unwrap();
        for j in 1..=2 {
            let qs = s.query_set_for_row(&w, RowId::new(0, 1, j, 1), &mut rng).unwrap();
            assert!(qs.queries[0].is_zero());
            let answers: Vec<Answer> = qs.by_server().iter().map(|q| server_answer(&store, q)).collect();
            let t = s.transcript(qs, answers).unwrap();
            assert_eq!(t.download_elements, 4 * 2);
            assert!(t.matches(&store));
        }
    }

    #[test]
    fn query_structure_invariants() {
        let s = scheme(7, 3, 2);
        let mut rng = ChaCha20Rng::seed_from_u64(2);
        let w = s.demand([1, 4, 6]).unwrap();
        for _ in 0..200 {
            let qs = s.make_query_set(&w, &mut rng).unwrap();
            let supports: Vec<Subset> = qs.queries.iter().map(CoeffVector::support).collect();
            assert!(supports[0].is_disjoint(w.set()));
            for sn in &supports[1..] {
                assert_eq!(sn.intersection(w.set()).len(), qs.row.j);
                assert_eq!(sn.difference(w.set()), supports[0]);
            }
            let mut sorted = qs.permutation.clone();
            sorted.sort_unstable();
            assert_eq!(sorted, [0, 1, 2, 3]);
        }
    }

    #[test]
    fn random_rounds_recover() {
        let s = scheme(5, 2, 4);
        let mut rng = ChaCha20Rng::seed_from_u64(7);
        for _ in 0..300 {
            let store = MessageStore::random(*s.field(), 5, 4, &mut rng);
            let all = DemandSet::all(s.params());
            let w = &all[rng.next_u32() as usize % all.len()];
            let t = s.run_round(w, &store, &mut rng).unwrap();
            assert!(t.matches(&store));
        }
    }

    #[test]
    fn differences_ignore_interference() {
        let s = scheme(6, 3, 3);
        let mut rng = ChaCha20Rng::seed_from_u64(8);
        let w = s.demand([2, 3, 5]).unwrap();
        for _ in 0..50 {
            let qs = s.make_query_set(&w, &mut rng).unwrap();
            let mut store = MessageStore::random(*s.field(), 6, 3, &mut rng);
            let z = |store: &MessageStore| -> Vec<Vec<u64>> {
                let y: Vec<Vec<u64>> = qs.queries.iter().map(|c| store.combine(c)).collect();
                (1..=3).map(|h| y[h].iter().zip(&y[0]).map(|(&a, &b)| s.field().sub(a, b)).collect()).collect()
            };
            let before = z(&store);
            for t in [1, 4, 6] {
                let fresh = (0..3).map(|_| s.field().random(&mut rng)).collect();
                store.set_message(t, fresh).unwrap();
            }
            assert_eq!(z(&store), before);
        }
    }

    #[test]
    fn malformed_answers_are_rejected() {
        let s = scheme(4, 2, 2);
        let mut rng = ChaCha20Rng::seed_from_u64(4);
        let w = s.demand([1, 3]).unwrap();
        let qs = s.make_query_set(&w, &mut rng).unwrap();
        assert!(s.recover(&qs, &[Answer::Empty, Answer::Empty]).is_err());
        let bad = vec![Answer::Combination(vec![0]); 3];
        assert!(s.recover(&qs, &bad).is_err());
    }
}
