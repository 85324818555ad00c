//! The G/M/1 queue observed just before arrivals, with uniform interarrival
//! times on `[0, b]` and exponential service at rate `μ`.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::lyapunov::{construct_k, moment_bound, Lyapunov, MomentCertificate};
use crate::state::Model;
use crate::{Error, Result};

/// Poisson masses below this are treated as zero.
const MASS_FLOOR: f64 = 1e-300;

/// `β_i = ∫ e^{-μt} (μt)^i / i! G(dt)` for `G = U[0, b]`, which integrates to
/// `P(N ≥ i + 1) / (μ b)` with `N ~ Poisson(μ b)`. The returned vector stops at
/// the last mass above the underflow floor.
pub fn gm1_beta(mu: f64, b: f64) -> Vec<f64> {
    let m = mu * b;
    let mut pmf = vec![libm::exp(-m)];
    loop {
        let j = pmf.len();
        let next = pmf[j - 1] * m / j as f64;
        if next < MASS_FLOOR && (j as f64) > m {
            break;
        }
        pmf.push(next);
    }
    // tail[j] = P(N ≥ j), summed from the far end
    let mut tail = vec![0.0; pmf.len() + 1];
    for j in (0..pmf.len()).rev() {
        tail[j] = tail[j + 1] + pmf[j];
    }
    let mut beta: Vec<f64> = tail[1..].iter().map(|t| t / m).collect();
    while beta.last() == Some(&0.0) {
        beta.pop();
    }
    beta
}

/// G/M/1 embedded chain with the quadratic/linear Lyapunov pair
/// `g1 = c1 x²`, `g2 = c2 x` for the reward `r(x) = x`.
#[derive(Debug, Clone)]
pub struct Gm1 {
    pub mu: f64,
    pub b: f64,
    pub c1: f64,
    pub c2: f64,
    /// Constant added to `g2` off the origin, which lets `K = {0}` satisfy
    /// the unit drift.
    pub g2_offset: f64,
    beta: Vec<f64>,
    /// `btail[i] = Σ_{j ≥ i} β_j`
    btail: Vec<f64>,
}

/// Analytic constants of the G/M/1 certificate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Gm1Constants {
    pub ev: f64,
    pub n1: u64,
    pub n2: u64,
    pub k_star: u64,
}

impl Gm1 {
    pub fn new(mu: f64, b: f64) -> Result<Self> {
        Self::with_constants(mu, b, 300.0, 300.0)
    }

    pub fn with_constants(mu: f64, b: f64, c1: f64, c2: f64) -> Result<Self> {
        if !(mu > 0.0 && b > 0.0 && c1 > 0.0 && c2 > 0.0) {
            return Err(Error::InvalidArgument(
                "G/M/1 parameters must be positive".into(),
            ));
        }
        let beta = gm1_beta(mu, b);
        let mut btail = vec![0.0; beta.len() + 1];
        for i in (0..beta.len()).rev() {
            btail[i] = btail[i + 1] + beta[i];
        }
        let q = Self {
            mu,
            b,
            c1,
            c2,
            g2_offset: 0.0,
            beta,
            btail,
        };
        if !(q.ev() > 1.0) {
            return Err(Error::Unstable(alloc::format!(
                "E V = {} must exceed 1",
                q.ev()
            )));
        }
        Ok(q)
    }

    /// The benchmark instance: `μ = 1`, `b = 2.01`.
    pub fn standard() -> Self {
        Self::new(1.0, 2.01).expect("standard G/M/1 parameters are stable")
    }

    /// Uses `g2(x) = c2 x + d` for `x ≥ 1`. Beyond `n2` the drift is
    /// unaffected since the offset only lowers `Σ_{y≥1} P(x,y) g2(y) - g2(x)`.
    pub fn with_g2_offset(mut self, d: f64) -> Self {
        self.g2_offset = d;
        self
    }

    /// Smallest integer offset for which the unit drift holds on
    /// `1..=max(n1, n2)` with `K = {0}`: the maximum over `x` of
    /// `(Σ_{y≥1} P(x,y) c2 y - c2 x + 1) / P(x,0)`, rounded up.
    pub fn singleton_g2_offset(&self) -> Result<f64> {
        let top = self.n1()?.max(self.n2()?) as u32;
        let mut d = 0.0f64;
        let mut row = Vec::new();
        for x in 1..=top {
            row.clear();
            self.transitions(&x, &mut row);
            let (mut up, mut to_zero) = (0.0, 0.0);
            for &(y, p) in &row {
                if y == 0 {
                    to_zero += p;
                } else {
                    up += p * self.c2 * y as f64;
                }
            }
            let a = up - self.c2 * x as f64 + 1.0;
            if a > 0.0 {
                if !(to_zero > 0.0) {
                    return Err(Error::DriftViolated {
                        count: 1,
                        first: alloc::format!("{x}"),
                    });
                }
                d = d.max(a / to_zero);
            }
        }
        Ok(libm::ceil(d) + 1.0)
    }

    pub fn beta(&self) -> &[f64] {
        &self.beta
    }

    /// `E f(V)` where `V` has masses `β`.
    pub fn moment<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.beta
            .iter()
            .enumerate()
            .map(|(i, p)| p * f(i as f64))
            .sum()
    }

    /// `E V = μ b / 2`.
    pub fn ev(&self) -> f64 {
        self.moment(|v| v)
    }

    /// `n1 = ⌈c1 E(1-V)² / (2 c1 (EV-1) - 1)⌉`, beyond which
    /// `(P g1)(x) ≤ g1(x) - x`.
    pub fn n1(&self) -> Result<u64> {
        let d = 2.0 * self.c1 * (self.ev() - 1.0) - 1.0;
        if !(d > 0.0) {
            return Err(Error::InvalidArgument(
                "c1 too small for a drift radius".into(),
            ));
        }
        Ok(libm::ceil(self.c1 * self.moment(|v| (1.0 - v) * (1.0 - v)) / d) as u64)
    }

    /// `n2 = ⌈(c2 E V³ / (c2 (EV-1) - 1))^{1/2}⌉`, beyond which
    /// `(P g2)(x) ≤ g2(x) - 1`.
    pub fn n2(&self) -> Result<u64> {
        let d = self.c2 * (self.ev() - 1.0) - 1.0;
        if !(d > 0.0) {
            return Err(Error::InvalidArgument(
                "c2 too small for a drift radius".into(),
            ));
        }
        Ok(libm::ceil(libm::sqrt(self.c2 * self.moment(|v| v * v * v) / d)) as u64)
    }

    pub fn constants(&self) -> Result<Gm1Constants> {
        let k = construct_k(self)?;
        Ok(Gm1Constants {
            ev: self.ev(),
            n1: self.n1()?,
            n2: self.n2()?,
            k_star: k.last().copied().unwrap_or(0) as u64,
        })
    }

    /// Radius `n3 = ⌈1 + max(|a2/a3|, |a1/a3|, |a0/a3|)⌉` for `g3 = c3 x⁴`,
    /// `w = x³`, with `a0 = c3 E(1-V)⁴`, `a1 = 4 c3 E(1-V)³`,
    /// `a2 = 6 c3 E(1-V)²`, `a3 = 4 c3 (1 - EV) + 1`.
    pub fn n3(&self, c3: f64) -> Result<u64> {
        let a3 = 4.0 * c3 * (1.0 - self.ev()) + 1.0;
        if !(a3 < 0.0) {
            return Err(Error::InvalidArgument(
                "c3 too small: 4 c3 (1 - EV) + 1 must be negative".into(),
            ));
        }
        let a0 = c3 * self.moment(|v| libm::pow(1.0 - v, 4.0));
        let a1 = 4.0 * c3 * self.moment(|v| libm::pow(1.0 - v, 3.0));
        let a2 = 6.0 * c3 * self.moment(|v| (1.0 - v) * (1.0 - v));
        let m = (a2 / a3).abs().max((a1 / a3).abs()).max((a0 / a3).abs());
        Ok(libm::ceil(1.0 + m) as u64)
    }

    /// `π w ≤ c` for `w = x³` through `g3 = c3 x⁴`, maximizing the drift
    /// excess over `0 ≤ x ≤ n3`.
    pub fn moment_certificate(&self, c3: f64) -> Result<MomentCertificate> {
        let n3 = self.n3(c3)?;
        moment_bound(
            self,
            &|x: &u32| c3 * libm::pow(*x as f64, 4.0),
            &|x: &u32| libm::pow(*x as f64, 3.0),
            0..=n3 as u32,
            n3,
        )
    }

    /// Decay rate `θ = 1 - ξ/μ` of the geometric equilibrium law.
    pub fn theta(&self) -> Result<f64> {
        Ok(1.0 - self.decay_gap()?)
    }

    /// `1 - θ = ξ/μ`, where `ξ` is the root in `(0, μ)` of
    /// `1 = μ/(μ-ξ) E e^{-ξT}`. Kept separate from [`Self::theta`] because
    /// `1 - θ` is small and loses digits once `θ` is rounded.
    ///
    /// The trivial root at `ξ = 0` is divided out before bisecting.
    pub fn decay_gap(&self) -> Result<f64> {
        let (mu, b) = (self.mu, self.b);
        let deflated = |xi: f64| -> f64 {
            let u = xi * b;
            if u < 1.0 {
                // Σ_{k≥2} (-1)^k ξ^{k-1} b^k / (k+1)!
                let mut s = 0.0f64;
                let mut term = b * u / 6.0;
                let mut k = 2;
                while term.abs() > 1e-30 * (1.0 + s.abs()) {
                    s += if k % 2 == 0 { term } else { -term };
                    k += 1;
                    term *= u / (k as f64 + 1.0);
                }
                // 1 - μb/2 is within a few ulps of zero; fma keeps it exact
                libm::fma(-mu, 0.5 * b, 1.0) + mu * s
            } else {
                let l = (1.0 - libm::exp(-u)) / u;
                (mu * l - mu + xi) / xi
            }
        };
        let (mut lo, mut hi) = (0.0, mu);
        if !(deflated(lo) < 0.0 && deflated(hi) > 0.0) {
            return Err(Error::Unstable(
                "no sign change for the decay-rate root".into(),
            ));
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if deflated(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(0.5 * (lo + hi) / mu)
    }

    /// `π(x) = (1-θ) θ^x` from the gap `1 - θ`.
    pub fn geometric(gap: f64, x: u32) -> f64 {
        gap * libm::exp(x as f64 * libm::log1p(-gap))
    }

    /// `π r = θ / (1-θ)` for `r(x) = x`.
    pub fn geometric_mean(gap: f64) -> f64 {
        (1.0 - gap) / gap
    }
}

impl Model for Gm1 {
    type State = u32;

    /// `P(x,y) = β_{x+1-y}` for `1 ≤ y ≤ x+1` and `P(x,0) = Σ_{i ≥ x+1} β_i`.
    fn transitions(&self, x: &u32, out: &mut Vec<(u32, f64)>) {
        let x = *x as usize;
        let top = x.min(self.beta.len() - 1);
        for i in 0..=top {
            out.push(((x + 1 - i) as u32, self.beta[i]));
        }
        let to_zero = self.btail.get(x + 1).copied().unwrap_or(0.0);
        if to_zero > 0.0 {
            out.push((0, to_zero));
        }
    }
}

impl Lyapunov for Gm1 {
    fn g1(&self, x: &u32) -> f64 {
        let x = *x as f64;
        self.c1 * x * x
    }
    fn g2(&self, x: &u32) -> f64 {
        if *x == 0 {
            0.0
        } else {
            self.c2 * *x as f64 + self.g2_offset
        }
    }
    fn r(&self, x: &u32) -> f64 {
        *x as f64
    }
    fn radii(&self) -> (u64, u64) {
        (self.n1().unwrap_or(0), self.n2().unwrap_or(0))
    }
    fn core(&self) -> Vec<u32> {
        let (n1, n2) = self.radii();
        (0..=n1.max(n2) as u32).collect()
    }
}


#[cfg(test)]
mod constant_tests {
    use super::*;

    #[test]
    fn standard_radii_and_return_set() {
        let q = Gm1::standard();
        let k = q.constants().unwrap();
        assert_eq!((k.n1, k.n2, k.k_star), (202, 66, 201));
    }

    #[test]
    fn moment_constant_is_finite() {
        let q = Gm1::standard();
        let m = q.moment_certificate(300.0).unwrap();
        assert!(m.c > 0.0 && m.c < 1e9);
        assert_eq!(m.checked as u64, m.n3 + 1);
    }
}
