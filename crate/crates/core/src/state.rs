//! Structured states, dense indexing and the `K | A'` block partition.

use alloc::collections::{BTreeMap, VecDeque};
use alloc::format;
use alloc::vec::Vec;
use core::fmt::Debug;

use crate::linalg::{CsrBuilder, CsrMatrix};
use crate::{Error, Result};

/// Default cap on the number of enumerated states.
pub const DEFAULT_STATE_CAP: usize = 50_000_000;

/// Tolerance on `|Σ_y P(x,y) - 1|` for every enumerated row.
pub const ROW_SUM_TOL: f64 = 1e-12;

/// A discrete-time chain given by its rows.
pub trait Model {
    type State: Clone + Ord + Debug;

    /// Appends the nonzero entries `(y, P(x,y))` of row `x` to `out`.
    /// Rows must have finite support and sum to one.
    fn transitions(&self, x: &Self::State, out: &mut Vec<(Self::State, f64)>);
}

impl<M: Model + ?Sized> Model for &M {
    type State = M::State;
    fn transitions(&self, x: &Self::State, out: &mut Vec<(Self::State, f64)>) {
        (**self).transitions(x, out)
    }
}

/// Bijection between the states of `A` and `0..|A|`, with `K` occupying the
/// leading indices. Both blocks are sorted by the state order.
#[derive(Debug, Clone)]
pub struct StateSpace<S> {
    states: Vec<S>,
    index: BTreeMap<S, usize>,
    k_size: usize,
}

impl<S: Clone + Ord> StateSpace<S> {
    /// Builds the indexing from the members of `K` and of `A' = A - K`.
    pub fn new(mut k: Vec<S>, mut a_prime: Vec<S>) -> Result<Self> {
        if k.is_empty() {
            return Err(Error::EmptyReturnSet);
        }
        k.sort();
        k.dedup();
        a_prime.sort();
        a_prime.dedup();
        let k_size = k.len();
        let mut states = k;
        states.extend(a_prime);
        let mut index = BTreeMap::new();
        for (i, s) in states.iter().enumerate() {
            if index.insert(s.clone(), i).is_some() {
                return Err(Error::InvalidArgument(
                    "a state appears in both K and A'".into(),
                ));
            }
        }
        Ok(Self {
            states,
            index,
            k_size,
        })
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn k_size(&self) -> usize {
        self.k_size
    }

    pub fn a_prime_size(&self) -> usize {
        self.states.len() - self.k_size
    }

    pub fn index_of(&self, x: &S) -> Option<usize> {
        self.index.get(x).copied()
    }

    pub fn state_of(&self, i: usize) -> &S {
        &self.states[i]
    }

    pub fn states(&self) -> &[S] {
        &self.states
    }

    pub fn k_states(&self) -> &[S] {
        &self.states[..self.k_size]
    }

    pub fn in_k(&self, i: usize) -> bool {
        i < self.k_size
    }

    /// Evaluates `f` at every state of `A` in index order.
    pub fn map<F: FnMut(&S) -> f64>(&self, f: F) -> Vec<f64> {
        self.states.iter().map(f).collect()
    }
}

/// Block sizes and the transitions leaving `A`.
#[derive(Debug, Clone)]
pub struct Partition<S> {
    pub k_size: usize,
    pub a_prime_size: usize,
    /// For each `x ∈ A` (by index), the entries `(y, P(x,y))` with `y ∉ A`.
    pub boundary_rows: Vec<Vec<(S, f64)>>,
}

/// Everything the censoring pipeline needs from a model restricted to `A`.
#[derive(Debug, Clone)]
pub struct Truncation<S> {
    pub space: StateSpace<S>,
    pub partition: Partition<S>,
    /// `P` restricted to `A × A`, indexed by the space.
    pub p: CsrMatrix,
    /// Exit probabilities `Σ_{y ∉ A} P(x,y)`, accumulated from the boundary
    /// entries (never formed as `1 - row sum`).
    pub exit: Vec<f64>,
}

impl<S: Clone + Ord + Debug> Truncation<S> {
    pub fn k_size(&self) -> usize {
        self.space.k_size()
    }

    pub fn len(&self) -> usize {
        self.space.len()
    }

    pub fn is_empty(&self) -> bool {
        self.space.is_empty()
    }

    /// `Σ_{y ∉ A} P(x,y) g(y)` for every `x ∈ A`.
    pub fn boundary_sum<F: FnMut(&S) -> f64>(&self, mut g: F) -> Vec<f64> {
        self.partition
            .boundary_rows
            .iter()
            .map(|row| row.iter().map(|(y, p)| p * g(y)).sum())
            .collect()
    }
}

/// Enumerates `A` by breadth-first expansion from `seed` and materializes the
/// partition.
///
/// `A` is the set of states reachable from `seed` through states satisfying
/// `in_a`; `K` is the subset satisfying `in_k`.
pub fn enumerate<M, FA, FK>(
    model: &M,
    seed: M::State,
    in_a: FA,
    in_k: FK,
    cap: usize,
) -> Result<Truncation<M::State>>
where
    M: Model,
    FA: Fn(&M::State) -> bool,
    FK: Fn(&M::State) -> bool,
{
    if !in_a(&seed) {
        return Err(Error::SeedOutsideTruncation);
    }
    let mut rows: BTreeMap<M::State, Vec<(M::State, f64)>> = BTreeMap::new();
    let mut queue = VecDeque::new();
    let mut seen: BTreeMap<M::State, ()> = BTreeMap::new();
    seen.insert(seed.clone(), ());
    queue.push_back(seed);
    let mut buf = Vec::new();
    while let Some(x) = queue.pop_front() {
        buf.clear();
        model.transitions(&x, &mut buf);
        validate_row(&x, &buf)?;
        for (y, _) in &buf {
            if !seen.contains_key(y) && in_a(y) {
                if seen.len() >= cap {
                    return Err(Error::EnumerationCap { cap });
                }
                seen.insert(y.clone(), ());
                queue.push_back(y.clone());
            }
        }
        rows.insert(x, core::mem::take(&mut buf));
    }
    drop(seen);

    let (k, a_prime): (Vec<_>, Vec<_>) = rows.keys().cloned().partition(|x| in_k(x));
    let space = StateSpace::new(k, a_prime)?;
    from_rows(space, |x| rows.get(x).cloned().unwrap_or_default())
}

/// Materializes a truncation over a given indexing. `row(x)` returns the full
/// row of `x`.
pub fn from_rows<S, F>(space: StateSpace<S>, mut row: F) -> Result<Truncation<S>>
where
    S: Clone + Ord + Debug,
    F: FnMut(&S) -> Vec<(S, f64)>,
{
    let n = space.len();
    let mut builder = CsrBuilder::new(n);
    let mut boundary = Vec::with_capacity(n);
    let mut exit = Vec::with_capacity(n);
    let mut inner = Vec::new();
    for x in space.states() {
        let r = row(x);
        validate_row(x, &r)?;
        inner.clear();
        let mut out = Vec::new();
        for (y, p) in r {
            match space.index_of(&y) {
                Some(j) => inner.push((j, p)),
                None => out.push((y, p)),
            }
        }
        out.sort_by(|a, b| a.0.cmp(&b.0));
        exit.push(out.iter().map(|e| e.1).sum());
        boundary.push(out);
        builder.push_row(&mut inner);
    }
    Ok(Truncation {
        partition: Partition {
            k_size: space.k_size(),
            a_prime_size: space.a_prime_size(),
            boundary_rows: boundary,
        },
        space,
        p: builder.finish(),
        exit,
    })
}

fn validate_row<S: Debug>(x: &S, row: &[(S, f64)]) -> Result<()> {
    let mut sum = 0.0;
    for (y, p) in row {
        if !p.is_finite() || *p < 0.0 {
            return Err(Error::InvalidRow {
                state: format!("{x:?}"),
                reason: format!("entry {p} towards {y:?}"),
            });
        }
        sum += p;
    }
    if (sum - 1.0).abs() > ROW_SUM_TOL {
        return Err(Error::InvalidRow {
            state: format!("{x:?}"),
            reason: format!("row sums to {sum}"),
        });
    }
    Ok(())
}
