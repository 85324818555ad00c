use alloc::vec;
use alloc::vec::Vec;

use super::{CsrMatrix, DenseLu, DenseMatrix, MMatrixLu};
use crate::{Error, Result};

/// Residual tolerance on stationary vectors and Perron pairs.
pub const STATIONARY_TOL: f64 = 1e-10;

/// Perron iteration stops when successive normalized iterates differ by less
/// than this in L1.
pub const PERRON_TOL: f64 = 1e-12;

pub const PERRON_MAX_ITER: usize = 1_000_000;

/// L1 change between inverse-iteration iterates at which it stops.
const INVERSE_TOL: f64 = 1e-14;

/// Stationary distribution of a small irreducible stochastic matrix.
///
/// Uses Grassmann–Taksar–Heyman state reduction, which only reads the
/// off-diagonal entries and never subtracts, so every component is computed
/// to high relative accuracy regardless of how slowly the chain mixes.
pub fn stationary_small(p: &DenseMatrix) -> Result<Vec<f64>> {
    let n = p.nrows();
    if p.ncols() != n || n == 0 {
        return Err(Error::Dimension(alloc::format!(
            "stationary vector of a {}x{} matrix",
            n,
            p.ncols()
        )));
    }
    for (i, s) in p.row_sums().iter().enumerate() {
        if (s - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidRow {
                state: alloc::format!("{i}"),
                reason: alloc::format!("row sum {s} is not 1"),
            });
        }
    }
    if n == 1 {
        return Ok(vec![1.0]);
    }
    let mut a = p.clone();
    for k in (1..n).rev() {
        let s: f64 = a.row(k)[..k].iter().sum();
        if !(s > 0.0) {
            return Err(Error::Reducible(alloc::format!(
                "state {k} cannot reach lower-indexed states"
            )));
        }
        for i in 0..k {
            a[(i, k)] /= s;
        }
        for i in 0..k {
            let aik = a[(i, k)];
            if aik == 0.0 {
                continue;
            }
            for j in 0..k {
                if j != i {
                    let akj = a[(k, j)];
                    a[(i, j)] += aik * akj;
                }
            }
        }
    }
    let mut pi = vec![0.0; n];
    pi[0] = 1.0;
    for k in 1..n {
        pi[k] = (0..k).map(|i| pi[i] * a[(i, k)]).sum();
    }
    if let Some(i) = pi.iter().position(|v| !(*v > 0.0)) {
        return Err(Error::Reducible(alloc::format!(
            "stationary vector has a nonpositive entry at index {i}"
        )));
    }
    let s: f64 = pi.iter().sum();
    for x in pi.iter_mut() {
        *x /= s;
    }
    let pp = p.vec_mul(&pi);
    let res = pp
        .iter()
        .zip(&pi)
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    if res > STATIONARY_TOL {
        return Err(Error::Residual {
            context: "stationary vector",
            residual: res,
            tolerance: STATIONARY_TOL,
        });
    }
    Ok(pi)
}

/// Dominant eigenvalue with positive left and right eigenvectors of an
/// irreducible nonnegative matrix, normalized so that `Σ ν(x) h(x) = 1`
/// and `Σ h(x) = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct PerronEigenpair {
    pub lambda: f64,
    pub nu: Vec<f64>,
    pub h: Vec<f64>,
    pub iterations: usize,
}

/// Perron pair by inverse iteration with `I - G`, factored with the exact
/// row deficits `leak = 1 - Σ_y G(x,y)` so that the near-singular case
/// (`ρ(G)` within rounding of `1`) is handled without cancellation.
///
/// When every deficit is zero, `G` is stochastic and the pair is `λ = 1`,
/// `h` uniform, `ν` the stationary vector.
pub fn perron_inverse(g: &DenseMatrix, leak: &[f64]) -> Result<PerronEigenpair> {
    let n = g.nrows();
    if g.ncols() != n || n == 0 || leak.len() != n {
        return Err(Error::Dimension(
            "Perron pair of a non-square matrix".into(),
        ));
    }
    if leak.iter().all(|d| *d == 0.0) {
        let pi = stationary_small(g)?;
        return Ok(PerronEigenpair {
            lambda: 1.0,
            nu: pi.iter().map(|v| v * n as f64).collect(),
            h: vec![1.0 / n as f64; n],
            iterations: 0,
        });
    }
    let lu = MMatrixLu::factor(&CsrMatrix::from_dense(n, n, g.as_slice()), Some(leak))?;
    let normalize = |mut w: Vec<f64>| -> Vec<f64> {
        let s: f64 = w.iter().sum();
        w.iter_mut().for_each(|x| *x /= s);
        w
    };
    let mut h = vec![1.0 / n as f64; n];
    let mut nu = h.clone();
    let mut iterations = 0;
    loop {
        if iterations >= PERRON_MAX_ITER {
            return Err(Error::NoConvergence(PERRON_MAX_ITER));
        }
        iterations += 1;
        let h2 = normalize(lu.solve(&h)?);
        let nu2 = normalize(lu.solve_transpose(&nu)?);
        let dh: f64 = h2.iter().zip(&h).map(|(a, b)| (a - b).abs()).sum();
        let dn: f64 = nu2.iter().zip(&nu).map(|(a, b)| (a - b).abs()).sum();
        h = h2;
        nu = nu2;
        if dh < INVERSE_TOL && dn < INVERSE_TOL {
            break;
        }
    }
    finish_pair(g, nu, h, iterations)
}

/// Power iteration on the shifted matrix `G + I`, which is primitive whenever
/// `G` is irreducible.
pub fn perron_eigenpair(g: &DenseMatrix) -> Result<PerronEigenpair> {
    let n = g.nrows();
    if g.ncols() != n || n == 0 {
        return Err(Error::Dimension(
            "Perron pair of a non-square matrix".into(),
        ));
    }
    let mut h = vec![1.0 / n as f64; n];
    let mut nu = h.clone();
    let step = |v: &[f64], right: bool| -> Vec<f64> {
        let mut w = if right { g.mul_vec(v) } else { g.vec_mul(v) };
        for (wi, vi) in w.iter_mut().zip(v) {
            *wi += vi;
        }
        let s: f64 = w.iter().sum();
        w.iter_mut().for_each(|x| *x /= s);
        w
    };
    let mut iterations = 0;
    loop {
        if iterations >= PERRON_MAX_ITER {
            return Err(Error::NoConvergence(PERRON_MAX_ITER));
        }
        iterations += 1;
        let h2 = step(&h, true);
        let nu2 = step(&nu, false);
        let dh: f64 = h2.iter().zip(&h).map(|(a, b)| (a - b).abs()).sum();
        let dn: f64 = nu2.iter().zip(&nu).map(|(a, b)| (a - b).abs()).sum();
        h = h2;
        nu = nu2;
        if dh < PERRON_TOL && dn < PERRON_TOL {
            break;
        }
    }
    finish_pair(g, nu, h, iterations)
}

/// Normalizes a converged pair and checks its residuals.
fn finish_pair(
    g: &DenseMatrix,
    mut nu: Vec<f64>,
    h: Vec<f64>,
    iterations: usize,
) -> Result<PerronEigenpair> {
    if h.iter().chain(&nu).any(|v| !(*v > 0.0)) {
        return Err(Error::Reducible(
            "Perron vector has a zero entry; G is reducible".into(),
        ));
    }
    let gh = g.mul_vec(&h);
    let lambda = dot(&nu, &gh) / dot(&nu, &h);
    let scale = dot(&nu, &h);
    nu.iter_mut().for_each(|x| *x /= scale);

    let hn = h.iter().fold(0.0f64, |m, v| m.max(*v));
    let rh = gh
        .iter()
        .zip(&h)
        .fold(0.0f64, |m, (a, b)| m.max((a - lambda * b).abs()))
        / hn;
    let ng = g.vec_mul(&nu);
    let nn = nu.iter().fold(0.0f64, |m, v| m.max(*v));
    let rn = ng
        .iter()
        .zip(&nu)
        .fold(0.0f64, |m, (a, b)| m.max((a - lambda * b).abs()))
        / nn;
    let res = rh.max(rn);
    if res > STATIONARY_TOL {
        return Err(Error::Residual {
            context: "Perron eigenpair",
            residual: res,
            tolerance: STATIONARY_TOL,
        });
    }
    Ok(PerronEigenpair {
        lambda,
        nu,
        h,
        iterations,
    })
}

/// `F = (I - P + Π)⁻¹` where `Π` stacks the stationary row `pi`.
pub fn fundamental_matrix(p: &DenseMatrix, pi: &[f64]) -> Result<DenseMatrix> {
    let n = p.nrows();
    if p.ncols() != n || pi.len() != n {
        return Err(Error::Dimension("fundamental matrix".into()));
    }
    let mut a = DenseMatrix::identity(n);
    for i in 0..n {
        for j in 0..n {
            a[(i, j)] += pi[j] - p[(i, j)];
        }
    }
    let f = DenseLu::factor(&a)?.inverse()?;
    let prod = f.matmul(&a);
    let mut res = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            let target = if i == j { 1.0 } else { 0.0 };
            res = res.max((prod[(i, j)] - target).abs());
        }
    }
    if res > 1e-9 {
        return Err(Error::Residual {
            context: "fundamental matrix",
            residual: res,
            tolerance: 1e-9,
        });
    }
    Ok(f)
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn two_state_flip() {
        let p = DenseMatrix::from_rows(&[&[0.0, 1.0], &[1.0, 0.0]]);
        let pi = stationary_small(&p).unwrap();
        assert_relative_eq!(pi[0], 0.5, epsilon = 1e-15);
        assert_relative_eq!(pi[1], 0.5, epsilon = 1e-15);
    }

    #[test]
    fn doubly_stochastic_is_uniform() {
        let p = DenseMatrix::from_rows(&[&[0.5, 0.5], &[0.5, 0.5]]);
        assert_eq!(stationary_small(&p).unwrap(), vec![0.5, 0.5]);
    }

    #[test]
    fn reducible_is_rejected() {
        let p = DenseMatrix::from_rows(&[&[1.0, 0.0, 0.0], &[0.5, 0.0, 0.5], &[0.0, 0.0, 1.0]]);
        assert!(stationary_small(&p).is_err());
    }

    #[test]
    fn perron_of_scalar() {
        let g = DenseMatrix::from_rows(&[&[0.9]]);
        let pair = perron_eigenpair(&g).unwrap();
        assert_relative_eq!(pair.lambda, 0.9, epsilon = 1e-14);
        assert_relative_eq!(pair.nu[0] * pair.h[0], 1.0, epsilon = 1e-14);
    }

    #[test]
    fn perron_of_scaled_stochastic() {
        let g = DenseMatrix::from_rows(&[&[0.8 * 0.3, 0.8 * 0.7], &[0.8 * 0.7, 0.8 * 0.3]]);
        let pair = perron_eigenpair(&g).unwrap();
        assert_relative_eq!(pair.lambda, 0.8, epsilon = 1e-12);
        assert_relative_eq!(pair.h[0], pair.h[1], epsilon = 1e-12);
    }

    #[test]
    fn fundamental_of_one_state() {
        let p = DenseMatrix::identity(1);
        let f = fundamental_matrix(&p, &[1.0]).unwrap();
        assert_relative_eq!(f[(0, 0)], 1.0);
    }

    #[test]
    fn fundamental_of_flip() {
        // I - P + Π = [[1.5, -0.5], [-0.5, 1.5]], inverse = [[0.75, 0.25], [0.25, 0.75]]
        let p = DenseMatrix::from_rows(&[&[0.0, 1.0], &[1.0, 0.0]]);
        let f = fundamental_matrix(&p, &[0.5, 0.5]).unwrap();
        assert_relative_eq!(f[(0, 0)], 0.75, epsilon = 1e-15);
        assert_relative_eq!(f[(0, 1)], 0.25, epsilon = 1e-15);
    }
}
