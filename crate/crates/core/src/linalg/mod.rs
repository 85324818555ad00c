//! Numerical kernels.

mod csr;
mod dense;
mod mlu;
mod scc;
mod stationary;

pub use csr::{CsrBuilder, CsrMatrix};
pub use dense::{DenseLu, DenseMatrix};
pub use mlu::{MMatrixLu, RESIDUAL_TOL};
pub use scc::{strongly_connected_components, Components};
pub(crate) use stationary::dot;
pub use stationary::{
    fundamental_matrix, perron_eigenpair, perron_inverse, stationary_small, PerronEigenpair,
    PERRON_MAX_ITER, PERRON_TOL, STATIONARY_TOL,
};

use alloc::vec::Vec;

use crate::Result;

/// Solves `(I - M) X = B` column by column for nonnegative substochastic `M`,
/// with the residual of every column checked.
pub fn solve_linear(m: &CsrMatrix, rhs: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let lu = MMatrixLu::factor(m, None)?;
    crate::par::try_map(rhs, |b| lu.solve(b))
}
