//! The censored matrix `G` on the return set, its stochasticizations and the
//! approximations built from them.
//!
//! With `A` ordered as `K | A'`, write `P11, P12, P21, P22` for the blocks of
//! `P` restricted to `A`. Everything here is expressed through the rows of
//! `W = P12 (I - P22)⁻¹`: `W(x,y)` is the expected number of visits to `y ∈ A'`
//! during a `K`-cycle from `x` that stays inside `A`.

use alloc::vec;
use alloc::vec::Vec;

use crate::linalg::{
    dot, perron_eigenpair, perron_inverse, stationary_small, strongly_connected_components,
    Components, CsrBuilder, CsrMatrix, DenseLu, DenseMatrix, MMatrixLu, PerronEigenpair,
};
use crate::state::Truncation;
use crate::{Error, Result};

/// Tolerance below zero tolerated for the deleted-state denominator before
/// it is treated as a breakdown.
pub const DENOMINATOR_GUARD: f64 = 1e-12;

/// Factored middle block and the rows of `W`.
#[derive(Debug, Clone)]
pub struct Censoring {
    k: usize,
    p: CsrMatrix,
    p11: CsrMatrix,
    p21: CsrMatrix,
    exit: Vec<f64>,
    lu: Option<MMatrixLu>,
    w: Vec<Option<Vec<f64>>>,
}

impl Censoring {
    pub fn new<S: Clone + Ord + core::fmt::Debug>(t: &Truncation<S>) -> Result<Self> {
        Self::from_matrix(&t.p, &t.exit, t.k_size())
    }

    /// `p` is `P` restricted to `A` with the first `k` indices forming `K`;
    /// `exit[x]` is the probability of leaving `A` from `x` in one step.
    pub fn from_matrix(p: &CsrMatrix, exit: &[f64], k: usize) -> Result<Self> {
        let n = p.nrows();
        if p.ncols() != n || exit.len() != n {
            return Err(Error::Dimension("transition block and exit vector".into()));
        }
        if k == 0 {
            return Err(Error::EmptyReturnSet);
        }
        if k > n {
            return Err(Error::Dimension("K larger than A".into()));
        }
        let m = n - k;
        let p11 = p.submatrix(0, k, 0, k);
        let p12 = p.submatrix(0, k, k, n);
        let p21 = p.submatrix(k, n, 0, k);
        let p22 = p.submatrix(k, n, k, n);
        let (lu, w) = if m == 0 {
            (None, vec![None; k])
        } else {
            let leak: Vec<f64> = (0..m).map(|j| p21.row_sum(j) + exit[k + j]).collect();
            let lu = MMatrixLu::factor(&p22, Some(&leak))?;
            let rows: Vec<usize> = (0..k).filter(|&x| !p12.row(x).0.is_empty()).collect();
            let solved = crate::par::try_map(&rows, |&x| {
                let mut b = vec![0.0; m];
                for (j, v) in p12.row_iter(x) {
                    b[j] = v;
                }
                lu.solve_transpose(&b)
            })?;
            let mut w = vec![None; k];
            for (x, row) in rows.into_iter().zip(solved) {
                w[x] = Some(row);
            }
            (Some(lu), w)
        };
        Ok(Self {
            k,
            p: p.clone(),
            p11,
            p21,
            exit: exit.to_vec(),
            lu,
            w,
        })
    }

    pub fn k_size(&self) -> usize {
        self.k
    }

    pub fn a_prime_size(&self) -> usize {
        self.p.nrows() - self.k
    }

    pub fn len(&self) -> usize {
        self.p.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.p.nrows() == 0
    }

    /// `P` restricted to `A`.
    pub fn p(&self) -> &CsrMatrix {
        &self.p
    }

    pub fn exit(&self) -> &[f64] {
        &self.exit
    }

    /// Row `x ∈ K` of `W`, or `None` when `P12` has no entry in that row.
    pub fn w_row(&self, x: usize) -> Option<&[f64]> {
        self.w[x].as_deref()
    }

    /// Factorization of `I - P22`, absent when `A' = ∅`.
    pub fn middle(&self) -> Option<&MMatrixLu> {
        self.lu.as_ref()
    }

    /// `v1 + W v2` for a vector `v` over `A`.
    pub fn through(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.len(), "vector must be indexed over A");
        let (v1, v2) = v.split_at(self.k);
        (0..self.k)
            .map(|x| v1[x] + self.w[x].as_ref().map_or(0.0, |w| dot(w, v2)))
            .collect()
    }

    /// The row vector `(μ, μ W)` over `A` for `μ` over `K`.
    pub fn push_forward(&self, mu: &[f64]) -> Vec<f64> {
        assert_eq!(mu.len(), self.k);
        let mut out = vec![0.0; self.len()];
        out[..self.k].copy_from_slice(mu);
        for x in 0..self.k {
            if let Some(w) = &self.w[x] {
                if mu[x] != 0.0 {
                    for (o, wi) in out[self.k..].iter_mut().zip(w) {
                        *o += mu[x] * wi;
                    }
                }
            }
        }
        out
    }

    /// `G = P11 + W P21` (not checked for irreducibility).
    pub fn g_unchecked(&self) -> DenseMatrix {
        let k = self.k;
        let mut g = DenseMatrix::from_row_major(k, k, self.p11.to_dense());
        for x in 0..k {
            if let Some(w) = &self.w[x] {
                let row = g.row_mut(x);
                for (j, &wj) in w.iter().enumerate() {
                    if wj == 0.0 {
                        continue;
                    }
                    for (y, v) in self.p21.row_iter(j) {
                        row[y] += wj * v;
                    }
                }
            }
        }
        g
    }

    /// Probability of leaving `A` before returning to `K`, for each `x ∈ K`,
    /// accumulated from exit probabilities rather than as `1 - Σ_y G(x,y)`.
    pub fn deficit(&self) -> Vec<f64> {
        self.through(&self.exit)
    }
}

/// The censored matrix `G`, failing when it is not irreducible.
pub fn compute_g(c: &Censoring) -> Result<DenseMatrix> {
    let g = c.g_unchecked();
    let comps =
        strongly_connected_components(&CsrMatrix::from_dense(g.nrows(), g.ncols(), g.as_slice()));
    if !comps.is_irreducible() {
        return Err(Error::GReducible {
            classes: comps.count,
        });
    }
    Ok(g)
}

/// `κ̲(x, w) = w1(x) + (W w2)(x)`: the reward collected over a `K`-cycle from
/// `x` restricted to paths that stay in `A`.
pub fn kappa_lower(c: &Censoring, w: &[f64]) -> Result<Vec<f64>> {
    if let Some(i) = w.iter().position(|v| !(*v >= 0.0) || !v.is_finite()) {
        return Err(Error::InvalidArgument(alloc::format!(
            "reward must be finite and nonnegative (index {i})"
        )));
    }
    Ok(c.through(w))
}

/// A stochastic matrix over `K` derived from `G` and its stationary vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Stochasticization {
    pub p: DenseMatrix,
    pub pi: Vec<f64>,
}

/// Row normalization `P2(x,y) = G(x,y) / n(x)`.
pub fn stochasticize_row(g: &DenseMatrix) -> Result<Stochasticization> {
    let k = g.nrows();
    let n = g.row_sums();
    let mut p = g.clone();
    for x in 0..k {
        if !(n[x] > 0.0) {
            return Err(Error::ZeroRowSum(x));
        }
        p.row_mut(x).iter_mut().for_each(|v| *v /= n[x]);
    }
    let pi = stationary_small(&p)?;
    Ok(Stochasticization { p, pi })
}

/// Perron–Frobenius twist `P1(x,y) = G(x,y) h(y) / (λ h(x))` with
/// `π1 = ν ∘ h`.
///
/// With the exact row deficits of `G` the pair comes from inverse iteration,
/// otherwise from power iteration.
pub fn stochasticize_pf(
    g: &DenseMatrix,
    deficit: Option<&[f64]>,
) -> Result<(Stochasticization, PerronEigenpair)> {
    let pair = match deficit {
        Some(d) => perron_inverse(g, d)?,
        None => perron_eigenpair(g)?,
    };
    let k = g.nrows();
    let mut p = g.clone();
    for x in 0..k {
        let s = pair.lambda * pair.h[x];
        for (y, v) in p.row_mut(x).iter_mut().enumerate() {
            *v = *v * pair.h[y] / s;
        }
    }
    let mut pi: Vec<f64> = pair.nu.iter().zip(&pair.h).map(|(a, b)| a * b).collect();
    let s: f64 = pi.iter().sum();
    pi.iter_mut().for_each(|v| *v /= s);
    let res = p
        .vec_mul(&pi)
        .iter()
        .zip(&pi)
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    if res > crate::linalg::STATIONARY_TOL {
        return Err(Error::Residual {
            context: "Perron stochasticization",
            residual: res,
            tolerance: crate::linalg::STATIONARY_TOL,
        });
    }
    Ok((Stochasticization { p, pi }, pair))
}

/// `π̃(r) = (π̃_K κ̲(r)) / (π̃_K κ̲(e))`.
pub fn approx_expectation(pi_k: &[f64], kappa_r: &[f64], kappa_e: &[f64]) -> f64 {
    dot(pi_k, kappa_r) / dot(pi_k, kappa_e)
}

/// The distribution over `A` induced by `π̃_K`: `(π̃_K, π̃_K W) / (π̃_K κ̲(e))`.
pub fn approx_distribution(c: &Censoring, pi_k: &[f64]) -> Vec<f64> {
    let mut d = c.push_forward(pi_k);
    let s: f64 = d.iter().sum();
    d.iter_mut().for_each(|v| *v /= s);
    d
}

/// Normalized occupation measure before the first exit from `A`, started at
/// index `z`: the solution of `ν (I - H) = δ_z` with `H = P|A`.
pub fn exit_approximation(p: &CsrMatrix, exit: &[f64], z: usize) -> Result<Vec<f64>> {
    let n = p.nrows();
    if z >= n {
        return Err(Error::InvalidArgument("start state outside A".into()));
    }
    let lu = MMatrixLu::factor(p, Some(exit))?;
    let mut b = vec![0.0; n];
    b[z] = 1.0;
    let mut nu = lu.solve_transpose(&b)?;
    let s: f64 = nu.iter().sum();
    nu.iter_mut().for_each(|v| *v /= s);
    Ok(nu)
}

/// Chain conditioned to return to `K` before leaving `A`.
#[derive(Debug, Clone)]
pub struct ConditionedChain {
    /// `u(x) = P_x(T_K < T)` over `A` (`T` the exit time; on `K` this is `n(x)`).
    pub u: Vec<f64>,
    /// Indices (into `A`) of the closed class `S″`, sorted.
    pub support: Vec<usize>,
    /// Transition matrix of the conditioned chain on `S″`, in `support` order.
    pub r: CsrMatrix,
    /// Stationary distribution over `A`, zero off `S″`.
    pub pi: Vec<f64>,
}

/// Builds the conditioned chain and its stationary distribution. `pi2` is the
/// stationary vector of the row-normalized `G`.
pub fn conditioned_chain(c: &Censoring, g: &DenseMatrix, pi2: &[f64]) -> Result<ConditionedChain> {
    let k = c.k_size();
    let n = c.len();
    let nrow = g.row_sums();
    // h = 1 on K, u on A'; u = n on K.
    let mut h = vec![1.0; n];
    let mut u = vec![0.0; n];
    u[..k].copy_from_slice(&nrow);
    if let Some(lu) = c.middle() {
        let b: Vec<f64> = (0..n - k).map(|j| c.p21.row_sum(j)).collect();
        let u2 = lu.solve(&b)?;
        for (j, v) in u2.into_iter().enumerate() {
            let v = v.max(0.0);
            u[k + j] = v;
            h[k + j] = v;
        }
    }
    let s_prime: Vec<usize> = (0..n).filter(|&x| u[x] > 0.0).collect();
    let mut local = vec![usize::MAX; n];
    for (i, &x) in s_prime.iter().enumerate() {
        local[x] = i;
    }
    let mut builder = CsrBuilder::new(s_prime.len());
    let mut row = Vec::new();
    for &x in &s_prime {
        row.clear();
        for (y, v) in c.p.row_iter(x) {
            if local[y] != usize::MAX {
                row.push((local[y], v * h[y] / u[x]));
            }
        }
        builder.push_row(&mut row);
    }
    let r_full = builder.finish();
    let comps = strongly_connected_components(&r_full);
    let label = comps.labels[local[0]];
    if !comps.closed[label] || (0..k).any(|x| comps.labels[local[x]] != label) {
        return Err(Error::NoClosedClass);
    }
    let support: Vec<usize> = s_prime
        .iter()
        .copied()
        .filter(|&x| comps.labels[local[x]] == label)
        .collect();
    let mut sub = vec![usize::MAX; s_prime.len()];
    for (i, &x) in support.iter().enumerate() {
        sub[local[x]] = i;
    }
    let mut builder = CsrBuilder::new(support.len());
    for &x in &support {
        row.clear();
        row.extend(
            r_full
                .row_iter(local[x])
                .filter(|(j, _)| sub[*j] != usize::MAX)
                .map(|(j, v)| (sub[j], v)),
        );
        builder.push_row(&mut row);
    }
    let r = builder.finish();

    // Censoring identity: visits to y ∈ A' per R-cycle from x are W(x,y) u(y) / u(x).
    let weights: Vec<f64> = (0..k).map(|x| pi2[x] / nrow[x]).collect();
    let mut pi = c.push_forward(&weights);
    pi[..k].copy_from_slice(pi2);
    for y in k..n {
        pi[y] *= u[y];
    }
    let s: f64 = pi.iter().sum();
    pi.iter_mut().for_each(|v| *v /= s);

    let on_support: Vec<f64> = support.iter().map(|&x| pi[x]).collect();
    let moved = r.vec_mul(&on_support);
    let scale = on_support.iter().fold(0.0f64, |m, v| m.max(*v));
    let res = moved
        .iter()
        .zip(&on_support)
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    if res > crate::linalg::STATIONARY_TOL * scale.max(1.0) {
        return Err(Error::Residual {
            context: "conditioned chain stationary vector",
            residual: res,
            tolerance: crate::linalg::STATIONARY_TOL,
        });
    }
    Ok(ConditionedChain { u, support, r, pi })
}

/// The state of `K` with the largest row sum of `G` (lowest index on ties).
pub fn deleted_state(g: &DenseMatrix) -> usize {
    let sums = g.row_sums();
    let mut best = 0;
    for (x, s) in sums.iter().enumerate() {
        if *s > sums[best] {
            best = x;
        }
    }
    best
}

/// The family `τ_x(y) = (I - G)⁻¹(x,y) / Σ_w (I - G)⁻¹(x,w)`, one row per `x`.
///
/// Computed without inverting `I - G`: with `z` deleted, let `Ĝ` be `G` on
/// `K - {z}`, `a = (I - Ĝ)⁻¹` (factored with exact leakage `d(x) + G(x,z)`),
/// `c = a G(·,z)`, `N = G(z,·) a` extended by `N(z) = 1`, and `D` the
/// probability of being killed before returning to `z`. Then row `x ≠ z` of
/// `(I - G)⁻¹` is proportional to `D a(x,·) + c(x) N` and row `z` to `N`.
/// `D` is accumulated as `d(z) + Σ_x G(z,x) (a d)(x)` so it never involves a
/// subtraction. `deficit` is the exact killing probability per row of `G`.
pub fn tau_family(g: &DenseMatrix, deficit: &[f64], z: usize) -> Result<DenseMatrix> {
    let k = g.nrows();
    if z >= k || deficit.len() != k {
        return Err(Error::Dimension("deleted state or deficit length".into()));
    }
    if k == 1 {
        return Ok(DenseMatrix::identity(1));
    }
    let others: Vec<usize> = (0..k).filter(|&x| x != z).collect();
    let ghat = g.delete(z);
    let leak: Vec<f64> = others.iter().map(|&x| deficit[x] + g[(x, z)]).collect();
    let lu = MMatrixLu::factor(
        &CsrMatrix::from_dense(k - 1, k - 1, ghat.as_slice()),
        Some(&leak),
    )?;
    let chi: Vec<f64> = others.iter().map(|&x| g[(x, z)]).collect();
    let gz: Vec<f64> = others.iter().map(|&x| g[(z, x)]).collect();
    let dhat: Vec<f64> = others.iter().map(|&x| deficit[x]).collect();
    let cvec = lu.solve(&chi)?;
    let killed = lu.solve(&dhat)?;
    let nvec = lu.solve_transpose(&gz)?;
    let d = deficit[z] + dot(&gz, &killed);
    if !(d >= -DENOMINATOR_GUARD) || !d.is_finite() {
        return Err(Error::Breakdown {
            context: "deleted-state",
            value: d,
        });
    }
    let d = d.max(0.0);
    let units: Vec<usize> = (0..k - 1).collect();
    let cols = crate::par::try_map(&units, |&j| {
        let mut e = vec![0.0; k - 1];
        e[j] = 1.0;
        lu.solve(&e)
    })?;

    let mut tau = DenseMatrix::zeros(k, k);
    {
        let row = tau.row_mut(z);
        row[z] = 1.0;
        for (j, &y) in others.iter().enumerate() {
            row[y] = nvec[j];
        }
    }
    for (i, &x) in others.iter().enumerate() {
        let row = tau.row_mut(x);
        row[z] = cvec[i];
        for (j, &y) in others.iter().enumerate() {
            row[y] = d * cols[j][i] + cvec[i] * nvec[j];
        }
    }
    for x in 0..k {
        let row = tau.row_mut(x);
        let s: f64 = row.iter().sum();
        if !(s > 0.0) || !s.is_finite() {
            return Err(Error::Breakdown {
                context: "tau row normalization",
                value: s,
            });
        }
        row.iter_mut().for_each(|v| *v /= s);
    }
    Ok(tau)
}

/// Reference path for [`tau_family`]: normalized rows of a dense `(I - G)⁻¹`.
pub fn tau_family_direct(g: &DenseMatrix) -> Result<DenseMatrix> {
    let k = g.nrows();
    let mut a = DenseMatrix::identity(k);
    for x in 0..k {
        for y in 0..k {
            a[(x, y)] -= g[(x, y)];
        }
    }
    let mut inv = DenseLu::factor(&a)?.inverse()?;
    for x in 0..k {
        let row = inv.row_mut(x);
        let s: f64 = row.iter().sum();
        row.iter_mut().for_each(|v| *v /= s);
    }
    Ok(inv)
}

/// Block structure of `G`.
#[derive(Debug, Clone)]
pub struct ClassReport {
    pub components: Components,
    /// Indices of closed classes.
    pub closed: Vec<usize>,
    /// Indices of transient classes.
    pub transient: Vec<usize>,
}

impl ClassReport {
    pub fn is_irreducible(&self) -> bool {
        self.components.is_irreducible()
    }
}

/// Decomposes `G` into communicating classes. More than one closed class
/// points at a reducible original chain and is logged as a warning.
pub fn communicating_classes_diagnostic(g: &DenseMatrix) -> ClassReport {
    let comps =
        strongly_connected_components(&CsrMatrix::from_dense(g.nrows(), g.ncols(), g.as_slice()));
    let closed: Vec<usize> = (0..comps.count).filter(|&c| comps.closed[c]).collect();
    let transient: Vec<usize> = (0..comps.count).filter(|&c| !comps.closed[c]).collect();
    if closed.len() > 1 {
        log::warn!(
            "G has {} closed communicating classes; the chain may be reducible",
            closed.len()
        );
    }
    ClassReport {
        components: comps,
        closed,
        transient,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn chain(d: &[f64], n: usize) -> CsrMatrix {
        CsrMatrix::from_dense(n, n, d)
    }

    #[test]
    fn empty_middle_gives_p11() {
        let p = chain(&[0.5, 0.5, 0.2, 0.8], 2);
        let c = Censoring::from_matrix(&p, &[0.0, 0.0], 2).unwrap();
        assert_eq!(compute_g(&c).unwrap().as_slice(), p.to_dense().as_slice());
        assert_eq!(kappa_lower(&c, &[1.0, 1.0]).unwrap(), vec![1.0, 1.0]);
    }

    #[test]
    fn flip_chain_return_time_is_two() {
        let p = chain(&[0.0, 1.0, 1.0, 0.0], 2);
        let c = Censoring::from_matrix(&p, &[0.0, 0.0], 1).unwrap();
        assert_relative_eq!(kappa_lower(&c, &[1.0, 1.0]).unwrap()[0], 2.0);
        let d = approx_distribution(&c, &[1.0]);
        assert_eq!(d, vec![0.5, 0.5]);
    }

    #[test]
    fn no_middle_self_transitions_truncates_series() {
        // P22 = 0 so G = P11 + P12 P21.
        let p = chain(
            &[
                0.2, 0.3, 0.5, 0.0, 0.4, 0.1, 0.0, 0.5, 0.7, 0.3, 0.0, 0.0, 0.0, 0.6, 0.0, 0.0,
            ],
            4,
        );
        let exit = [0.0, 0.0, 0.0, 0.4];
        let c = Censoring::from_matrix(&p, &exit, 2).unwrap();
        let g = compute_g(&c).unwrap();
        let p11 = [0.2, 0.3, 0.4, 0.1];
        let p12 = [0.5, 0.0, 0.0, 0.5];
        let p21 = [0.7, 0.3, 0.0, 0.6];
        for x in 0..2 {
            for y in 0..2 {
                let want =
                    p11[x * 2 + y] + (0..2).map(|j| p12[x * 2 + j] * p21[j * 2 + y]).sum::<f64>();
                assert_relative_eq!(g[(x, y)], want, epsilon = 1e-15);
            }
        }
        let d = c.deficit();
        assert_relative_eq!(d[1], 0.5 * 0.4, epsilon = 1e-15);
        for x in 0..2 {
            assert_relative_eq!(g.row(x).iter().sum::<f64>() + d[x], 1.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn row_normalization_arithmetic() {
        let g = DenseMatrix::from_rows(&[&[0.4, 0.4], &[0.2, 0.6]]);
        let s = stochasticize_row(&g).unwrap();
        for (a, b) in s.p.as_slice().iter().zip([0.5, 0.5, 0.25, 0.75]) {
            assert_relative_eq!(*a, b, epsilon = 1e-15);
        }
        assert_relative_eq!(s.pi[0], 1.0 / 3.0, epsilon = 1e-15);
    }

    #[test]
    fn zero_row_is_named() {
        let g = DenseMatrix::from_rows(&[&[0.4, 0.4], &[0.0, 0.0]]);
        assert!(matches!(stochasticize_row(&g), Err(Error::ZeroRowSum(1))));
    }

    #[test]
    fn perron_of_scaled_stochastic_recovers_p() {
        let p = [0.3, 0.7, 0.6, 0.4];
        let g = DenseMatrix::from_row_major(2, 2, p.iter().map(|v| 0.9 * v).collect());
        let (s, pair) = stochasticize_pf(&g, None).unwrap();
        assert_relative_eq!(pair.lambda, 0.9, epsilon = 1e-12);
        for (a, b) in s.p.as_slice().iter().zip(p) {
            assert_relative_eq!(*a, b, epsilon = 1e-11);
        }
        assert_relative_eq!(s.pi[0], 6.0 / 13.0, epsilon = 1e-11);
        let (inv, ipair) = stochasticize_pf(&g, Some(&[0.1, 0.1])).unwrap();
        assert_relative_eq!(ipair.lambda, 0.9, epsilon = 1e-14);
        assert_relative_eq!(inv.pi[0], 6.0 / 13.0, epsilon = 1e-14);
        let (one, _) = stochasticize_pf(&DenseMatrix::from_rows(&[&[0.9]]), None).unwrap();
        assert_eq!(one.p.as_slice(), &[1.0]);
        assert_eq!(one.pi, vec![1.0]);
    }

    #[test]
    fn expectation_of_constants() {
        let kr = [2.0, 4.0];
        let ke = [1.0, 2.0];
        assert_relative_eq!(approx_expectation(&[0.3, 0.7], &ke, &ke), 1.0);
        assert_relative_eq!(approx_expectation(&[0.3, 0.7], &kr, &ke), 2.0);
    }

    #[test]
    fn tau_two_state_arithmetic() {
        let g = DenseMatrix::from_rows(&[&[0.0, 0.5], &[0.5, 0.0]]);
        for z in 0..2 {
            let tau = tau_family(&g, &[0.5, 0.5], z).unwrap();
            assert_relative_eq!(tau[(0, 0)], 2.0 / 3.0, epsilon = 1e-15);
            assert_relative_eq!(tau[(0, 1)], 1.0 / 3.0, epsilon = 1e-15);
            assert_relative_eq!(tau[(1, 1)], 2.0 / 3.0, epsilon = 1e-15);
        }
        assert_eq!(
            tau_family(&DenseMatrix::from_rows(&[&[0.3]]), &[0.7], 0)
                .unwrap()
                .as_slice(),
            &[1.0]
        );
    }

    #[test]
    fn tau_includes_the_deleted_diagonal() {
        let g = DenseMatrix::from_rows(&[&[0.3, 0.2, 0.1], &[0.25, 0.25, 0.25], &[0.1, 0.6, 0.2]]);
        let d: Vec<f64> = g.row_sums().iter().map(|s| 1.0 - s).collect();
        let direct = tau_family_direct(&g).unwrap();
        for z in 0..3 {
            let tau = tau_family(&g, &d, z).unwrap();
            for (a, b) in tau.as_slice().iter().zip(direct.as_slice()) {
                assert_relative_eq!(*a, *b, epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn tau_with_stochastic_g_collapses_to_stationary() {
        let g = DenseMatrix::from_rows(&[&[0.5, 0.5], &[0.25, 0.75]]);
        let tau = tau_family(&g, &[0.0, 0.0], deleted_state(&g)).unwrap();
        for x in 0..2 {
            assert_relative_eq!(tau[(x, 0)], 1.0 / 3.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn negative_denominator_is_a_breakdown() {
        let g = DenseMatrix::from_rows(&[&[0.5, 0.5], &[0.25, 0.75]]);
        assert!(matches!(
            tau_family(&g, &[-1e-6, 0.0], 0),
            Err(Error::Breakdown { .. })
        ));
    }

    #[test]
    fn exit_approximation_of_single_state() {
        let p = chain(&[0.3], 1);
        assert_eq!(exit_approximation(&p, &[0.7], 0).unwrap(), vec![1.0]);
    }

    #[test]
    fn conditioned_chain_with_no_exit_is_the_chain() {
        let p = chain(&[0.1, 0.9, 0.0, 0.5, 0.0, 0.5, 0.3, 0.3, 0.4], 3);
        let exit = [0.0; 3];
        let c = Censoring::from_matrix(&p, &exit, 1).unwrap();
        let g = compute_g(&c).unwrap();
        let s = stochasticize_row(&g).unwrap();
        let cc = conditioned_chain(&c, &g, &s.pi).unwrap();
        for v in &cc.u {
            assert_relative_eq!(*v, 1.0, epsilon = 1e-14);
        }
        for (a, b) in cc.r.to_dense().iter().zip(p.to_dense()) {
            assert_relative_eq!(*a, b, epsilon = 1e-14);
        }
        let pi = stationary_small(&DenseMatrix::from_row_major(3, 3, p.to_dense())).unwrap();
        for (a, b) in cc.pi.iter().zip(&pi) {
            assert_relative_eq!(*a, *b, epsilon = 1e-13);
        }
    }

    #[test]
    fn diagnostic_flags_two_closed_classes() {
        let g = DenseMatrix::from_rows(&[&[0.5, 0.0, 0.0], &[0.0, 0.5, 0.2], &[0.0, 0.3, 0.5]]);
        let rep = communicating_classes_diagnostic(&g);
        assert_eq!(rep.closed.len(), 2);
        assert!(!rep.is_irreducible());
        let c = Censoring::from_matrix(&chain(g.as_slice(), 3), &[0.5, 0.3, 0.2], 3).unwrap();
        assert!(matches!(
            compute_g(&c),
            Err(Error::GReducible { classes: 2 })
        ));
    }
}
