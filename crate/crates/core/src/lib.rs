//! Truncation approximations to the equilibrium distribution of irreducible,
//! positive recurrent Markov chains and jump processes on huge or countably
//! infinite state spaces, with certified two-sided bounds.
//!
//! The method fixes a finite *return set* `K` inside a finite *truncation set*
//! `A` and represents equilibrium expectations as ratios of expectations over
//! `K`-cycles. Paths that leave `A` are never simulated or solved for; their
//! contribution is bounded through user-supplied Lyapunov functions.
//!
//! Layout:
//!
//! - [`state`]: indexing of structured states and the `K | A' | boundary` partition.
//! - [`linalg`]: sparse and dense kernels (M-matrix LU, stationary vectors, Perron pairs).
//! - [`censor`]: the censored matrix `G`, its stochasticizations and the derived approximations.
//! - [`lyapunov`]: drift verification, return-set construction, overflow vectors, moment bounds.
//! - [`bounds`]: equilibrium-expectation and weighted total-variation guarantees.
//! - [`ctmc`]: the same pipeline for jump processes via the embedded chain.
//! - [`models`]: the G/M/1 queue and toggle-switch families plus a user-model hook.
//! - [`pipeline`]: end-to-end assembly used by the CLI.
//!
//! The crate is `no_std` (with `alloc`) unless the default `std` feature is
//! enabled; `std` only adds parallel right-hand-side solves.

#![cfg_attr(not(feature = "std"), no_std)]
// `!(x > 0.0)` is used on purpose so that NaN takes the failing branch.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// Dense kernels index several arrays with one loop variable.
#![allow(clippy::needless_range_loop)]

extern crate alloc;

pub mod bounds;
pub mod censor;
pub mod ctmc;
mod error;
pub mod linalg;
pub mod lyapunov;
pub mod models;
mod par;
pub mod pipeline;
pub mod state;

pub use error::{Error, ErrorKind, Result};
