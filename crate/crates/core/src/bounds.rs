//! Certified bounds on equilibrium expectations and weighted total variation.
//!
//! Notation over the return set `K`: `κ̲(w)` is the lower cycle reward from
//! [`crate::censor::kappa_lower`], `β = h_{·1} + W h_{·2}` the overflow carried
//! back to `K`, and `κ̃ = κ̲ + β` the matching upper bound. The unit reward `e`
//! is `1` in discrete time.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::censor::Censoring;
use crate::linalg::{dot, DenseMatrix};
use crate::lyapunov::{Envelope, LyapunovCertificate};
use crate::{Error, Result};

/// How `G` was made stochastic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stochasticity {
    /// `P2 = G / n`.
    RowNormalized,
    /// `P1` from the Perron pair of `G`.
    Perron,
}

/// A closed interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lower: f64,
    pub upper: f64,
}

impl Interval {
    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn contains(&self, v: f64) -> bool {
        self.lower <= v && v <= self.upper
    }
}

/// `β = h_K + W h_{A'}` for an overflow vector `h` over `A`.
pub fn beta(c: &Censoring, h: &[f64]) -> Vec<f64> {
    c.through(h)
}

/// `κ̃(x) = κ̲(x) + β(x)` for the overflow pair selected by `which`
/// (`h1` for the reward `r`, `h2` for the unit reward).
pub fn kappa_upper(
    c: &Censoring,
    cert: &LyapunovCertificate,
    which: Envelope,
    kappa_lower: &[f64],
) -> Result<Vec<f64>> {
    cert.require_envelope(which)?;
    let h = match which {
        Envelope::Reward => &cert.h1,
        Envelope::Unit => &cert.h2,
    };
    Ok(kappa_lower
        .iter()
        .zip(beta(c, h))
        .map(|(a, b)| a + b)
        .collect())
}

/// `κ̲(z,r)/κ̃₂(z,e) ≤ π r ≤ κ̃₁(z,r)/κ̲(z,e)` for `K = {z}`.
pub fn singleton_bounds(
    kl_r: &[f64],
    ku_r: &[f64],
    kl_e: &[f64],
    ku_e: &[f64],
) -> Result<Interval> {
    if kl_r.len() != 1 {
        return Err(Error::NotSingleton(kl_r.len()));
    }
    Ok(Interval {
        lower: kl_r[0] / ku_e[0],
        upper: ku_r[0] / kl_e[0],
    })
}

/// Mixture bounds over the `τ` family:
/// `min τκ̲(r) / max τκ̃₂(e) ≤ π r ≤ max τκ̃₁(r) / min τκ̲(e)`.
pub fn minorization_bounds(
    tau: &DenseMatrix,
    kl_r: &[f64],
    ku_r: &[f64],
    kl_e: &[f64],
    ku_e: &[f64],
) -> Result<Interval> {
    let k = tau.nrows();
    let (mut lo_num, mut hi_num) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut lo_den, mut hi_den) = (f64::INFINITY, f64::NEG_INFINITY);
    for x in 0..k {
        let t = tau.row(x);
        lo_num = lo_num.min(dot(t, kl_r));
        hi_num = hi_num.max(dot(t, ku_r));
        lo_den = lo_den.min(dot(t, kl_e));
        hi_den = hi_den.max(dot(t, ku_e));
    }
    if !(lo_den > 0.0) {
        return Err(Error::Breakdown {
            context: "minorization",
            value: lo_den,
        });
    }
    Ok(Interval {
        lower: lo_num / hi_den,
        upper: hi_num / lo_den,
    })
}

/// `|π̃₂(r) - π r| ≤ upper - lower`. Only valid for the row-normalized
/// approximation, whose stationary vector lies in the mixture family.
pub fn approx_error_bound(bounds: Interval, method: Stochasticity) -> Result<f64> {
    match method {
        Stochasticity::RowNormalized => Ok(bounds.width().max(0.0)),
        Stochasticity::Perron => Err(Error::NotCertified("approximation error")),
    }
}

/// `2 max(β₁(z)/κ̲(z,e), π̃(r) β₂(z)/κ̲(z,e))` for `K = {z}`.
pub fn tv_bound_singleton(beta1: &[f64], beta2: &[f64], kl_e: &[f64], approx: f64) -> Result<f64> {
    if beta1.len() != 1 {
        return Err(Error::NotSingleton(beta1.len()));
    }
    Ok(2.0 * (beta1[0] / kl_e[0]).max(approx * beta2[0] / kl_e[0]))
}

/// `Δ₂ ≤ max_{x,y} Σ_w |τ_x(w) - τ_y(w)|`.
pub fn delta2_bound(tau: &DenseMatrix) -> f64 {
    let k = tau.nrows();
    let mut best = 0.0f64;
    for x in 0..k {
        let a = tau.row(x);
        for y in x + 1..k {
            let d: f64 = a.iter().zip(tau.row(y)).map(|(p, q)| (p - q).abs()).sum();
            best = best.max(d);
        }
    }
    best.min(2.0)
}

/// `Δ ≤ ‖(P̃ - G) F‖∞ + (1 - δ)‖F‖∞` for any irreducible stochastic `P̃`
/// with fundamental matrix `F`; `one_minus_delta` is `max_x (1 - n(x))`.
pub fn delta1_bound(
    p: &DenseMatrix,
    g: &DenseMatrix,
    f: &DenseMatrix,
    one_minus_delta: f64,
) -> f64 {
    let k = p.nrows();
    let mut diff = p.clone();
    for x in 0..k {
        for y in 0..k {
            diff[(x, y)] -= g[(x, y)];
        }
    }
    (diff.matmul(f).norm_inf() + one_minus_delta.max(0.0) * f.norm_inf()).min(2.0)
}

/// Entrywise relative accuracy assumed for a computed stochasticization of
/// `G`, in units of machine epsilon. `G` is assembled without subtractions.
pub const ROUNDING_ULPS: f64 = 8.0;

/// Floating-point allowance on `‖π̂ - π‖₁` for a computed stationary vector.
///
/// `π̂ - π(p) = (π̂ - π̂ p) f` exactly for the stored matrix `p` with
/// fundamental matrix `f`. Entrywise relative errors of size `η` in the
/// off-diagonal entries of `p` move every component of `π` by a relative
/// factor of at most `(1 + η)^{2(k-1)}` (Markov chain tree theorem). The
/// allowance is the sum of the two with `η = ulps · ε`.
pub fn rounding_delta(p: &DenseMatrix, pi: &[f64], f: &DenseMatrix, ulps: f64) -> f64 {
    let k = pi.len();
    if k <= 1 {
        return 0.0;
    }
    let moved = p.vec_mul(pi);
    let res: Vec<f64> = pi.iter().zip(&moved).map(|(a, b)| a - b).collect();
    let first: f64 = f.vec_mul(&res).iter().map(|v| v.abs()).sum();
    let eta = ulps * f64::EPSILON;
    let tree = libm::expm1(2.0 * (k - 1) as f64 * libm::log1p(eta));
    first + tree
}

/// Lower bound on `π_K κ(e)` used as the denominator of the general TV bound:
/// `min_x τ_x κ̲(e)`. Valid because `π_K` is a mixture of the `τ_x` and
/// `κ ≥ κ̲`.
pub fn ell_lower(tau: &DenseMatrix, kl_e: &[f64]) -> f64 {
    (0..tau.nrows())
        .map(|x| dot(tau.row(x), kl_e))
        .fold(f64::INFINITY, f64::min)
}

/// Ingredients of the general weighted-TV bound.
#[derive(Debug, Clone, Copy)]
pub struct TvInputs<'a> {
    /// Stationary vector of the stochasticized `G`.
    pub pi: &'a [f64],
    pub beta1: &'a [f64],
    pub beta2: &'a [f64],
    /// `κ̃₁(r)`.
    pub ku_r: &'a [f64],
    /// `κ̃₂(e)`.
    pub ku_e: &'a [f64],
    /// `π̃(r)`.
    pub approx: f64,
    pub delta: f64,
    pub ell: f64,
}

/// `2ε` with
/// `ε = (π β₁ + π̃(r) π β₂)/ℓ + Δ (π̃(r) ‖κ̃₂(e)‖∞ + ‖κ̃₁(r)‖∞)/ℓ`.
pub fn tv_bound_general(inp: TvInputs<'_>) -> Result<f64> {
    if !(inp.ell > 0.0) {
        return Err(Error::Breakdown {
            context: "TV bound",
            value: inp.ell,
        });
    }
    let sup = |v: &[f64]| v.iter().fold(0.0f64, |m, a| m.max(a.abs()));
    let eps = (dot(inp.pi, inp.beta1) + inp.approx * dot(inp.pi, inp.beta2)) / inp.ell
        + inp.delta * (inp.approx * sup(inp.ku_e) + sup(inp.ku_r)) / inp.ell;
    Ok(2.0 * eps)
}

/// Widens an interval outward by the relative amount `rel` of each endpoint,
/// so that floating-point error in its computation cannot exclude the value.
pub fn widen(iv: Interval, rel: f64) -> Interval {
    Interval {
        lower: iv.lower - rel * iv.lower.abs(),
        upper: iv.upper + rel * iv.upper.abs(),
    }
}

/// Relative rounding allowance for an interval endpoint: a ratio of two
/// nonnegative dot products of length `k` whose entries carry relative
/// error `ulps · ε`.
pub fn interval_rounding(k: usize, ulps: f64) -> f64 {
    2.0 * (2.0 * ulps + k as f64) * f64::EPSILON
}

/// Combines bounds on `π f⁺` and `π f⁻` into a bound on `π f`.
pub fn mixed_sign(positive: Interval, negative: Interval) -> Interval {
    Interval {
        lower: positive.lower - negative.upper,
        upper: positive.upper - negative.lower,
    }
}

/// Splits `f` into `(f⁺, f⁻)`.
pub fn split_sign(f: &[f64]) -> (Vec<f64>, Vec<f64>) {
    (
        f.iter().map(|v| v.max(0.0)).collect(),
        f.iter().map(|v| (-v).max(0.0)).collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn singleton_requires_one_state() {
        assert!(matches!(
            singleton_bounds(&[1.0, 1.0], &[1.0, 1.0], &[1.0, 1.0], &[1.0, 1.0]),
            Err(Error::NotSingleton(2))
        ));
        let b = singleton_bounds(&[2.0], &[2.5], &[2.0], &[2.2]).unwrap();
        assert!(b.contains(1.0));
    }

    #[test]
    fn one_point_mixture_equals_singleton() {
        let tau = DenseMatrix::identity(1);
        let (klr, kur, kle, kue) = ([3.0], [3.3], [2.0], [2.1]);
        let s = singleton_bounds(&klr, &kur, &kle, &kue).unwrap();
        let m = minorization_bounds(&tau, &klr, &kur, &kle, &kue).unwrap();
        assert_eq!(s, m);
    }

    #[test]
    fn perron_error_bound_is_refused() {
        let b = Interval {
            lower: 1.0,
            upper: 1.0,
        };
        assert_eq!(
            approx_error_bound(b, Stochasticity::RowNormalized).unwrap(),
            0.0
        );
        assert!(matches!(
            approx_error_bound(b, Stochasticity::Perron),
            Err(Error::NotCertified(_))
        ));
    }

    #[test]
    fn exact_inputs_give_zero_tv() {
        assert_eq!(
            tv_bound_singleton(&[0.0], &[0.0], &[3.0], 1.7).unwrap(),
            0.0
        );
        let v = [1.0, 2.0];
        let t = tv_bound_general(TvInputs {
            pi: &[0.5, 0.5],
            beta1: &[0.0, 0.0],
            beta2: &[0.0, 0.0],
            ku_r: &v,
            ku_e: &v,
            approx: 1.0,
            delta: 0.0,
            ell: 1.0,
        })
        .unwrap();
        assert_eq!(t, 0.0);
    }

    #[test]
    fn delta2_trivial_cases() {
        assert_eq!(delta2_bound(&DenseMatrix::identity(1)), 0.0);
        let same = DenseMatrix::from_rows(&[&[0.2, 0.8], &[0.2, 0.8]]);
        assert_eq!(delta2_bound(&same), 0.0);
        let apart = DenseMatrix::from_rows(&[&[1.0, 0.0], &[0.25, 0.75]]);
        assert_relative_eq!(delta2_bound(&apart), 1.5);
    }

    #[test]
    fn delta1_vanishes_for_stochastic_g() {
        let g = DenseMatrix::from_rows(&[&[0.3, 0.7], &[0.6, 0.4]]);
        let f = crate::linalg::fundamental_matrix(&g, &[6.0 / 13.0, 7.0 / 13.0]).unwrap();
        assert_eq!(delta1_bound(&g, &g, &f, 0.0), 0.0);
        let one = DenseMatrix::identity(1);
        assert_eq!(delta1_bound(&one, &one, &one, 0.0), 0.0);
    }

    #[test]
    fn mixed_sign_split_and_combine() {
        let (p, n) = split_sign(&[1.0, -2.0, 0.0]);
        assert_eq!(p, vec![1.0, 0.0, 0.0]);
        assert_eq!(n, vec![0.0, 2.0, 0.0]);
        let i = mixed_sign(
            Interval {
                lower: 1.0,
                upper: 2.0,
            },
            Interval {
                lower: 0.5,
                upper: 0.75,
            },
        );
        assert_eq!(
            i,
            Interval {
                lower: 0.25,
                upper: 1.5
            }
        );
    }
}
