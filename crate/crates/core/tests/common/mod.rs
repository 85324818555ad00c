//! Random finite hosts and dense reference computations.
#![allow(dead_code, clippy::needless_range_loop)]

use std::sync::Arc;

use ktrunc_core::lyapunov::{certify, LyapunovCertificate};
use ktrunc_core::models::UserModel;
use ktrunc_core::state::{from_rows, StateSpace, Truncation};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// An irreducible chain on `0..n` with a positive reward.
#[derive(Debug, Clone)]
pub struct Host {
    pub p: Arc<Vec<Vec<f64>>>,
    pub r: Vec<f64>,
}

impl Host {
    /// Dense-ish random rows plus a cycle `x → x+1`, which makes the chain
    /// irreducible.
    pub fn random(seed: u64, n: usize, density: f64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p = vec![vec![0.0; n]; n];
        for x in 0..n {
            for y in 0..n {
                if rng.random::<f64>() < density {
                    p[x][y] = rng.random::<f64>();
                }
            }
            p[x][(x + 1) % n] += 0.05 + rng.random::<f64>();
            let s: f64 = p[x].iter().sum();
            p[x].iter_mut().for_each(|v| *v /= s);
        }
        let r = (0..n).map(|_| 0.5 + 2.5 * rng.random::<f64>()).collect();
        Self { p: Arc::new(p), r }
    }

    /// A birth–death chain on `0..n` drifting towards 0.
    pub fn birth_death(n: usize, up: f64) -> Self {
        let mut p = vec![vec![0.0; n]; n];
        for x in 0..n {
            let u = if x + 1 < n { up } else { 0.0 };
            let d = if x > 0 { 1.0 - up - 0.1 } else { 0.0 };
            if x + 1 < n {
                p[x][x + 1] = u;
            }
            if x > 0 {
                p[x][x - 1] = d;
            }
            p[x][x] = 1.0 - u - d;
        }
        let r = (0..n).map(|x| 1.0 + x as f64).collect();
        Self { p: Arc::new(p), r }
    }

    pub fn n(&self) -> usize {
        self.p.len()
    }

    pub fn dense(&self) -> DMatrix<f64> {
        let n = self.n();
        DMatrix::from_fn(n, n, |i, j| self.p[i][j])
    }

    /// `π` by Grassmann–Taksar–Heyman state reduction, which avoids
    /// subtractions and is accurate componentwise.
    pub fn stationary(&self) -> Vec<f64> {
        gth(&self.p)
    }

    /// Solution `g` of `g(x) = w(x) + Σ_{y ∉ K} P(x,y) g(y)` off `K`, zero
    /// on `K`: the `w`-reward collected before entering `K`.
    pub fn excursion(&self, in_k: &[bool], w: &[f64]) -> Vec<f64> {
        let out: Vec<usize> = (0..self.n()).filter(|&x| !in_k[x]).collect();
        let m = out.len();
        let mut g = vec![0.0; self.n()];
        if m == 0 {
            return g;
        }
        let a = DMatrix::from_fn(m, m, |i, j| {
            (if i == j { 1.0 } else { 0.0 }) - self.p[out[i]][out[j]]
        });
        let b = DVector::from_fn(m, |i, _| w[out[i]]);
        let sol = a
            .lu()
            .solve(&b)
            .expect("I - P on the complement of K is nonsingular");
        for (i, &x) in out.iter().enumerate() {
            g[x] = sol[i];
        }
        g
    }

    /// `κ(x, w) = w(x) + Σ_{y ∉ K} P(x,y) g(y)` for `x ∈ K`.
    pub fn kappa(&self, in_k: &[bool], w: &[f64]) -> Vec<f64> {
        let g = self.excursion(in_k, w);
        (0..self.n())
            .filter(|&x| in_k[x])
            .map(|x| {
                w[x] + (0..self.n())
                    .filter(|&y| !in_k[y])
                    .map(|y| self.p[x][y] * g[y])
                    .sum::<f64>()
            })
            .collect()
    }

    /// The host as a model whose Lyapunov functions are the exact excursion
    /// rewards, scaled up by `1 + inflate` so the drift holds strictly.
    pub fn model(&self, in_k: &[bool], inflate: f64) -> UserModel<u32> {
        let n = self.n();
        let ones = vec![1.0; n];
        let g1: Vec<f64> = self
            .excursion(in_k, &self.r)
            .iter()
            .map(|v| v * (1.0 + inflate))
            .collect();
        let g2: Vec<f64> = self
            .excursion(in_k, &ones)
            .iter()
            .map(|v| v * (1.0 + inflate))
            .collect();
        let r = self.r.clone();
        let p = Arc::clone(&self.p);
        UserModel::new(move |x: &u32, out: &mut Vec<(u32, f64)>| {
            for (y, v) in p[*x as usize].iter().enumerate() {
                if *v > 0.0 {
                    out.push((y as u32, *v));
                }
            }
        })
        .with_lyapunov(
            move |x| g1[*x as usize],
            move |x| g2[*x as usize],
            move |x| r[*x as usize],
            (0, 0),
            (0..n as u32).collect(),
        )
    }

    /// Truncation to `A` with return set `K` (both given as index lists).
    pub fn truncation(&self, model: &UserModel<u32>, k: &[usize], a: &[usize]) -> Truncation<u32> {
        let kset: Vec<u32> = k.iter().map(|&x| x as u32).collect();
        let rest: Vec<u32> = a
            .iter()
            .filter(|x| !k.contains(x))
            .map(|&x| x as u32)
            .collect();
        let space = StateSpace::new(kset, rest).unwrap();
        let mut buf = Vec::new();
        from_rows(space, |x| {
            buf.clear();
            use ktrunc_core::state::Model;
            model.transitions(x, &mut buf);
            buf.clone()
        })
        .unwrap()
    }

    /// Model, truncation and verified certificate in one go.
    pub fn setup(
        &self,
        k: &[usize],
        a: &[usize],
        inflate: f64,
    ) -> (UserModel<u32>, Truncation<u32>, LyapunovCertificate) {
        let mut in_k = vec![false; self.n()];
        k.iter().for_each(|&x| in_k[x] = true);
        let model = self.model(&in_k, inflate);
        let t = self.truncation(&model, k, a);
        let cert = certify(&model, &t).unwrap();
        (model, t, cert)
    }

    /// `G` for `K ⊂ A` by dense Schur complement, rows and columns in the
    /// sorted order of `k`.
    pub fn schur(&self, k: &[usize], a: &[usize]) -> DMatrix<f64> {
        let mut ks = k.to_vec();
        ks.sort();
        let rest: Vec<usize> = {
            let mut v: Vec<usize> = a.iter().copied().filter(|x| !k.contains(x)).collect();
            v.sort();
            v
        };
        let (nk, m) = (ks.len(), rest.len());
        let p11 = DMatrix::from_fn(nk, nk, |i, j| self.p[ks[i]][ks[j]]);
        if m == 0 {
            return p11;
        }
        let p12 = DMatrix::from_fn(nk, m, |i, j| self.p[ks[i]][rest[j]]);
        let p21 = DMatrix::from_fn(m, nk, |i, j| self.p[rest[i]][ks[j]]);
        let i_p22 = DMatrix::from_fn(m, m, |i, j| {
            (if i == j { 1.0 } else { 0.0 }) - self.p[rest[i]][rest[j]]
        });
        let inv = i_p22.try_inverse().unwrap();
        p11 + p12 * inv * p21
    }
}

pub fn gth(p: &[Vec<f64>]) -> Vec<f64> {
    let n = p.len();
    let mut a: Vec<Vec<f64>> = p.to_vec();
    for k in (1..n).rev() {
        let s: f64 = a[k][..k].iter().sum();
        for i in 0..k {
            let f = a[i][k] / s;
            for j in 0..k {
                let v = f * a[k][j];
                a[i][j] += v;
            }
        }
    }
    let mut pi = vec![0.0; n];
    pi[0] = 1.0;
    for k in 1..n {
        pi[k] = (0..k).map(|i| pi[i] * a[i][k]).sum::<f64>() / a[k][..k].iter().sum::<f64>();
    }
    let total: f64 = pi.iter().sum();
    pi.iter().map(|v| v / total).collect()
}

/// `π (I - P) = 0`, `Σ π = 1` by dense LU.
pub fn stationary_dense(p: &DMatrix<f64>) -> Vec<f64> {
    let n = p.nrows();
    let mut a = DMatrix::identity(n, n) - p.transpose();
    for j in 0..n {
        a[(n - 1, j)] = 1.0;
    }
    let mut b = DVector::zeros(n);
    b[n - 1] = 1.0;
    a.lu().solve(&b).unwrap().iter().copied().collect()
}

/// Spreads a distribution over `A` (in truncation index order) onto `0..n`.
pub fn on_host(t: &Truncation<u32>, pi: &[f64], n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n];
    for (i, v) in pi.iter().enumerate() {
        out[*t.space.state_of(i) as usize] = *v;
    }
    out
}

/// `Σ_x |a(x) - b(x)| w(x)`.
pub fn weighted_tv(a: &[f64], b: &[f64], w: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .zip(w)
        .map(|((p, q), w)| (p - q).abs() * w)
        .sum()
}

/// Random `K ⊆ A ⊆ 0..n` with `K` nonempty, drawn from `seed`.
pub fn random_sets(seed: u64, n: usize, full_a: bool) -> (Vec<usize>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let mut a: Vec<usize> = (0..n)
        .filter(|_| full_a || rng.random::<f64>() < 0.7)
        .collect();
    if a.is_empty() {
        a.push(0);
    }
    let mut k: Vec<usize> = a
        .iter()
        .copied()
        .filter(|_| rng.random::<f64>() < 0.3)
        .collect();
    if k.is_empty() {
        k.push(a[rng.random_range(0..a.len())]);
    }
    (k, a)
}
