//! User-supplied chains built from closures.

use alloc::boxed::Box;
use alloc::vec::Vec;
use core::fmt::Debug;

use crate::lyapunov::Lyapunov;
use crate::state::Model;

type RowFn<S> = Box<dyn Fn(&S, &mut Vec<(S, f64)>) + Send + Sync>;
type ScalarFn<S> = Box<dyn Fn(&S) -> f64 + Send + Sync>;

/// A chain given by a row function and optional Lyapunov data.
///
/// Rows are validated when a truncation is enumerated. Without Lyapunov
/// data the functions are zero and the core is empty, which suits a finite
/// chain truncated to its whole state space.
pub struct UserModel<S> {
    row: RowFn<S>,
    g1: ScalarFn<S>,
    g2: ScalarFn<S>,
    r: ScalarFn<S>,
    radii: (u64, u64),
    core: Vec<S>,
}

impl<S: Clone + Ord + Debug> UserModel<S> {
    pub fn new<F>(row: F) -> Self
    where
        F: Fn(&S, &mut Vec<(S, f64)>) + Send + Sync + 'static,
    {
        Self {
            row: Box::new(row),
            g1: Box::new(|_| 0.0),
            g2: Box::new(|_| 0.0),
            r: Box::new(|_| 0.0),
            radii: (0, 0),
            core: Vec::new(),
        }
    }

    /// Attaches `g1`, `g2`, `r` and the core on which drift is checked.
    pub fn with_lyapunov<G1, G2, R>(
        mut self,
        g1: G1,
        g2: G2,
        r: R,
        radii: (u64, u64),
        core: Vec<S>,
    ) -> Self
    where
        G1: Fn(&S) -> f64 + Send + Sync + 'static,
        G2: Fn(&S) -> f64 + Send + Sync + 'static,
        R: Fn(&S) -> f64 + Send + Sync + 'static,
    {
        self.g1 = Box::new(g1);
        self.g2 = Box::new(g2);
        self.r = Box::new(r);
        self.radii = radii;
        self.core = core;
        self
    }
}

impl<S: Clone + Ord + Debug> Model for UserModel<S> {
    type State = S;
    fn transitions(&self, x: &S, out: &mut Vec<(S, f64)>) {
        (self.row)(x, out)
    }
}

impl<S: Clone + Ord + Debug> Lyapunov for UserModel<S> {
    fn g1(&self, x: &S) -> f64 {
        (self.g1)(x)
    }
    fn g2(&self, x: &S) -> f64 {
        (self.g2)(x)
    }
    fn r(&self, x: &S) -> f64 {
        (self.r)(x)
    }
    fn radii(&self) -> (u64, u64) {
        self.radii
    }
    fn core(&self) -> Vec<S> {
        self.core.clone()
    }
}
