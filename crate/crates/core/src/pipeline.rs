//! End-to-end analysis of a truncation: censoring, stochasticization, the
//! `τ` family, expectation bounds and weighted total-variation guarantees.
//!
//! Rewards are expressed per step of the chain being censored. For a jump
//! process analyzed through [`crate::ctmc::Embedded`], a reward `f` is turned
//! into `f / λ` by multiplying with [`Lyapunov::unit`], and the approximate
//! distributions are reweighted the same way.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::bounds::{
    approx_error_bound, delta1_bound, delta2_bound, ell_lower, interval_rounding,
    minorization_bounds, mixed_sign, rounding_delta, singleton_bounds, split_sign,
    tv_bound_general, tv_bound_singleton, widen, Interval, Stochasticity, TvInputs,
};
use crate::censor::{
    approx_expectation, compute_g, conditioned_chain, deleted_state, exit_approximation,
    kappa_lower, stochasticize_pf, stochasticize_row, tau_family, Censoring,
};
use crate::ctmc::{check_reward_dominates_rate, Embedded, JumpLyapunov};
use crate::linalg::{dot, fundamental_matrix, DenseMatrix};
use crate::lyapunov::{Envelope, Lyapunov, LyapunovCertificate};
use crate::state::Truncation;
use crate::{Error, Result};

/// Relative slack when checking `|f| ≤ envelope` on `A`.
const ENVELOPE_TOL: f64 = 1e-12;

/// A reward whose equilibrium expectation is bounded.
pub enum RewardFn<'a, S> {
    /// The reward `r` certified by `g1`.
    Lyapunov,
    /// The constant `1`.
    Unit,
    /// A user reward, dominated by its envelope. May change sign.
    Custom(&'a dyn Fn(&S) -> f64),
}

pub struct Reward<'a, S> {
    pub name: String,
    pub envelope: Envelope,
    pub f: RewardFn<'a, S>,
}

impl<'a, S> Reward<'a, S> {
    pub fn lyapunov() -> Self {
        Self {
            name: "r".into(),
            envelope: Envelope::Reward,
            f: RewardFn::Lyapunov,
        }
    }

    pub fn unit() -> Self {
        Self {
            name: "e".into(),
            envelope: Envelope::Unit,
            f: RewardFn::Unit,
        }
    }

    pub fn custom(name: impl Into<String>, envelope: Envelope, f: &'a dyn Fn(&S) -> f64) -> Self {
        Self {
            name: name.into(),
            envelope,
            f: RewardFn::Custom(f),
        }
    }
}

/// Which parts of the analysis to run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Options {
    /// Stochasticizations of `G` to evaluate.
    pub methods: Vec<Stochasticity>,
    /// Envelopes for which a weighted-TV guarantee is produced.
    pub tv_envelopes: Vec<Envelope>,
    /// Also compute the occupation measure before exit from the deleted state.
    pub exit_approximation: bool,
    /// Also compute the stationary law of the chain conditioned to stay in `A`.
    pub conditioned: bool,
    /// Assumed entrywise relative accuracy of the computed `G`, in ulps,
    /// used for the floating-point allowance on `Δ`.
    pub rounding_ulps: f64,
}

impl Default for Options {
    fn default() -> Self {
        Self {
            methods: vec![Stochasticity::RowNormalized],
            tv_envelopes: vec![Envelope::Reward, Envelope::Unit],
            exit_approximation: false,
            conditioned: false,
            rounding_ulps: crate::bounds::ROUNDING_ULPS,
        }
    }
}

/// Singleton bounds are used when `|K| = 1`, mixture bounds otherwise.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundMethod {
    Singleton,
    Minorization,
}

/// How the distance between the stochasticized vector and the censored
/// stationary law was bounded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeltaKind {
    /// Not needed: `|K| = 1`.
    Exact,
    /// Pairwise spread of the `τ` family.
    Tau,
    /// Fundamental-matrix perturbation bound.
    Fundamental,
}

/// Bounds on one reward under one stochasticization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub reward: String,
    pub envelope: Envelope,
    pub method: BoundMethod,
    pub stochasticity: Stochasticity,
    pub lower: f64,
    pub upper: f64,
    pub approx: f64,
    /// `|approx - π f|` bound; only for the row-normalized method.
    pub approx_error: Option<f64>,
    /// Guarantee on the envelope-weighted TV distance of the approximate law.
    pub tv_bound: Option<f64>,
    pub delta: Option<f64>,
    pub delta_kind: Option<DeltaKind>,
    /// `β` for the envelope's reward and unit overflow.
    pub beta1: Vec<f64>,
    pub beta2: Vec<f64>,
}

/// A weighted-TV guarantee for one envelope and stochasticization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TvReport {
    pub envelope: Envelope,
    pub stochasticity: Stochasticity,
    /// The guarantee including the floating-point allowance.
    pub bound: f64,
    /// The theorem's value on the computed inputs, with no allowance for
    /// rounding in the stationary vector or the pushed-forward law.
    pub bound_exact: f64,
    /// Approximate expectation of the envelope itself.
    pub approx: f64,
    /// Total distance bound used, including `delta_rounding`.
    pub delta: f64,
    pub delta_kind: DeltaKind,
    /// Floating-point allowance on the computed stationary vector.
    pub delta_rounding: f64,
    /// Denominator lower bound (general case) or `κ̲(z,e)` (singleton case).
    pub ell: f64,
}

/// Wall-clock seconds spent per stage, from the injected clock.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    /// Factoring `I - P22`, forming `W` and `G`.
    pub g_build: f64,
    pub stochasticize: f64,
    pub tau: f64,
    pub bounds: f64,
    pub total: f64,
}

/// An approximate equilibrium law over `A` in index order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Distribution {
    pub stochasticity: Stochasticity,
    pub pi: Vec<f64>,
}

/// Everything produced for one truncation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Analysis {
    pub k_size: usize,
    pub a_size: usize,
    /// Index in `K` of the deleted state.
    pub deleted_state: usize,
    /// `δ = min_x Σ_y G(x,y)`.
    pub min_row_sum: f64,
    /// Largest probability of leaving `A` during a `K`-cycle.
    pub max_deficit: f64,
    pub bounds: Vec<BoundReport>,
    pub tv: Vec<TvReport>,
    pub distributions: Vec<Distribution>,
    pub exit: Option<Vec<f64>>,
    pub conditioned: Option<Vec<f64>>,
    pub timings: Timings,
}

impl Analysis {
    pub fn bound(&self, reward: &str, method: Stochasticity) -> Option<&BoundReport> {
        self.bounds
            .iter()
            .find(|b| b.reward == reward && b.stochasticity == method)
    }

    pub fn tv_bound(&self, envelope: Envelope, method: Stochasticity) -> Option<f64> {
        self.tv
            .iter()
            .find(|t| t.envelope == envelope && t.stochasticity == method)
            .map(|t| t.bound)
    }

    pub fn distribution(&self, method: Stochasticity) -> Option<&[f64]> {
        self.distributions
            .iter()
            .find(|d| d.stochasticity == method)
            .map(|d| d.pi.as_slice())
    }
}

/// Per-envelope quantities over `K`.
struct EnvelopeData {
    /// `κ̲` of the envelope reward.
    kl: Vec<f64>,
    /// `β` of the envelope's overflow.
    beta1: Vec<f64>,
    /// `β` of the unit overflow.
    beta2: Vec<f64>,
}

/// One stochasticization with its distance bound to the censored law.
struct Approx {
    method: Stochasticity,
    pi: Vec<f64>,
    delta: f64,
    delta_kind: DeltaKind,
    rounding: f64,
}

/// Runs the analysis of `t` for `model` under the verified certificate `cert`.
pub fn analyze<L: Lyapunov>(
    model: &L,
    t: &Truncation<L::State>,
    cert: &LyapunovCertificate,
    rewards: &[Reward<'_, L::State>],
    opts: &Options,
    clock: &dyn Fn() -> f64,
) -> Result<Analysis> {
    cert.require_verified()?;
    if cert.h1.len() != t.len() || cert.h2.len() != t.len() {
        return Err(Error::Dimension(
            "certificate evaluated on another truncation".into(),
        ));
    }
    if opts.methods.is_empty() {
        return Err(Error::InvalidArgument(
            "no stochasticization requested".into(),
        ));
    }
    let t0 = clock();
    let mut timings = Timings::default();

    let c = Censoring::new(t)?;
    let g = compute_g(&c)?;
    let k = c.k_size();
    let unit = t.space.map(|x| model.unit(x));
    let r = t.space.map(|x| model.r(x));
    let kl_e = kappa_lower(&c, &unit)?;
    let kl_r = kappa_lower(&c, &r)?;
    let deficit = c.deficit();
    let nrow = g.row_sums();
    let min_row_sum = nrow.iter().copied().fold(f64::INFINITY, f64::min);
    let max_deficit = deficit.iter().copied().fold(0.0, f64::max);
    let one_minus_delta = (1.0 - min_row_sum).max(max_deficit);
    let t1 = clock();
    timings.g_build = t1 - t0;

    let beta_of = |h: &[f64]| c.through(h);
    let beta_h1 = beta_of(&cert.h1);
    let beta_h2 = beta_of(&cert.h2);
    let envelope = |e: Envelope| -> EnvelopeData {
        match e {
            Envelope::Reward => EnvelopeData {
                kl: kl_r.clone(),
                beta1: beta_h1.clone(),
                beta2: beta_h2.clone(),
            },
            Envelope::Unit => EnvelopeData {
                kl: kl_e.clone(),
                beta1: beta_h2.clone(),
                beta2: beta_h2.clone(),
            },
        }
    };
    let ku_e: Vec<f64> = kl_e.iter().zip(&beta_h2).map(|(a, b)| a + b).collect();

    let z = deleted_state(&g);
    let mut approxes = Vec::new();
    let mut row_pi = None;
    for &m in &opts.methods {
        let (s, delta, kind) = match m {
            Stochasticity::RowNormalized => {
                let s = stochasticize_row(&g)?;
                row_pi = Some(s.pi.clone());
                (s, 0.0, DeltaKind::Exact)
            }
            Stochasticity::Perron => (
                stochasticize_pf(&g, Some(&deficit))?.0,
                0.0,
                DeltaKind::Exact,
            ),
        };
        let mut a = Approx {
            method: m,
            pi: s.pi.clone(),
            delta,
            delta_kind: kind,
            rounding: 0.0,
        };
        if k > 1 {
            let f = fundamental_matrix(&s.p, &s.pi)?;
            a.rounding = rounding_delta(&s.p, &s.pi, &f, opts.rounding_ulps);
            if m == Stochasticity::Perron {
                a.delta = delta1_bound(&s.p, &g, &f, one_minus_delta);
                a.delta_kind = DeltaKind::Fundamental;
            }
        }
        approxes.push(a);
    }
    let t2 = clock();
    timings.stochasticize = t2 - t1;

    let tau = if k == 1 {
        DenseMatrix::identity(1)
    } else {
        tau_family(&g, &deficit, z)?
    };
    if k > 1 {
        let d2 = delta2_bound(&tau);
        for a in approxes.iter_mut() {
            if a.method == Stochasticity::RowNormalized {
                a.delta = d2;
                a.delta_kind = DeltaKind::Tau;
            }
        }
    }
    let t3 = clock();
    timings.tau = t3 - t2;

    let method = if k == 1 {
        BoundMethod::Singleton
    } else {
        BoundMethod::Minorization
    };
    let interval = |kl_f: &[f64], beta1: &[f64]| -> Result<Interval> {
        let ku_f: Vec<f64> = kl_f.iter().zip(beta1).map(|(a, b)| a + b).collect();
        let iv = if k == 1 {
            singleton_bounds(kl_f, &ku_f, &kl_e, &ku_e)?
        } else {
            minorization_bounds(&tau, kl_f, &ku_f, &kl_e, &ku_e)?
        };
        Ok(widen(iv, interval_rounding(k, opts.rounding_ulps)))
    };

    for e in opts
        .tv_envelopes
        .iter()
        .chain(rewards.iter().map(|r| &r.envelope))
    {
        cert.require_envelope(*e)?;
    }
    let mut tv = Vec::new();
    let ell = ell_lower(&tau, &kl_e);
    for &e in &opts.tv_envelopes {
        let ed = envelope(e);
        let ku_env: Vec<f64> = ed.kl.iter().zip(&ed.beta1).map(|(a, b)| a + b).collect();
        for a in &approxes {
            let approx = approx_expectation(&a.pi, &ed.kl, &kl_e);
            let theorem = |delta: f64| -> Result<f64> {
                if k == 1 {
                    tv_bound_singleton(&ed.beta1, &ed.beta2, &kl_e, approx)
                } else {
                    tv_bound_general(TvInputs {
                        pi: &a.pi,
                        beta1: &ed.beta1,
                        beta2: &ed.beta2,
                        ku_r: &ku_env,
                        ku_e: &ku_e,
                        approx,
                        delta: delta.min(2.0),
                        ell,
                    })
                }
            };
            let exact = theorem(a.delta)?;
            let delta = (a.delta + a.rounding).min(2.0);
            // entrywise rounding of the pushed-forward law moves its
            // envelope-weighted mass by at most a relative 2ρ
            let spread = 2.0 * opts.rounding_ulps * f64::EPSILON * approx;
            tv.push(TvReport {
                envelope: e,
                stochasticity: a.method,
                bound: theorem(delta)? + spread,
                bound_exact: exact,
                approx,
                delta,
                delta_kind: a.delta_kind,
                delta_rounding: a.rounding,
                ell: if k == 1 { kl_e[0] } else { ell },
            });
        }
    }

    let mut reports = Vec::new();
    for rw in rewards {
        let ed = envelope(rw.envelope);
        let (kl_pos, kl_neg) = match &rw.f {
            RewardFn::Lyapunov => (kl_r.clone(), None),
            RewardFn::Unit => (kl_e.clone(), None),
            RewardFn::Custom(f) => {
                let env = match rw.envelope {
                    Envelope::Reward => &r,
                    Envelope::Unit => &unit,
                };
                let vals: Vec<f64> = t
                    .space
                    .states()
                    .iter()
                    .zip(&unit)
                    .map(|(x, u)| f(x) * u)
                    .collect();
                for (i, (v, b)) in vals.iter().zip(env).enumerate() {
                    if !v.is_finite() || v.abs() > b * (1.0 + ENVELOPE_TOL) {
                        return Err(Error::InvalidArgument(alloc::format!(
                            "reward '{}' exceeds its envelope at {:?}",
                            rw.name,
                            t.space.state_of(i)
                        )));
                    }
                }
                let (pos, neg) = split_sign(&vals);
                let neg = if neg.iter().any(|v| *v > 0.0) {
                    Some(kappa_lower(&c, &neg)?)
                } else {
                    None
                };
                (kappa_lower(&c, &pos)?, neg)
            }
        };
        let iv = match &kl_neg {
            None => interval(&kl_pos, &ed.beta1)?,
            Some(kn) => mixed_sign(interval(&kl_pos, &ed.beta1)?, interval(kn, &ed.beta1)?),
        };
        for a in &approxes {
            let mut approx = approx_expectation(&a.pi, &kl_pos, &kl_e);
            if let Some(kn) = &kl_neg {
                approx -= approx_expectation(&a.pi, kn, &kl_e);
            }
            let approx_error = match a.method {
                Stochasticity::RowNormalized => Some(approx_error_bound(iv, a.method)?),
                Stochasticity::Perron => None,
            };
            let tvr = tv
                .iter()
                .find(|v| v.envelope == rw.envelope && v.stochasticity == a.method);
            reports.push(BoundReport {
                reward: rw.name.clone(),
                envelope: rw.envelope,
                method,
                stochasticity: a.method,
                lower: iv.lower,
                upper: iv.upper,
                approx,
                approx_error,
                tv_bound: tvr.map(|v| v.bound),
                delta: tvr.map(|v| v.delta),
                delta_kind: tvr.map(|v| v.delta_kind),
                beta1: ed.beta1.clone(),
                beta2: ed.beta2.clone(),
            });
        }
    }

    let weigh = |mut d: Vec<f64>| -> Vec<f64> {
        d.iter_mut().zip(&unit).for_each(|(v, u)| *v *= u);
        let s: f64 = d.iter().sum();
        d.iter_mut().for_each(|v| *v /= s);
        d
    };
    let distributions = approxes
        .iter()
        .map(|a| Distribution {
            stochasticity: a.method,
            pi: weigh(c.push_forward(&a.pi)),
        })
        .collect();
    let exit = if opts.exit_approximation {
        Some(weigh(exit_approximation(&t.p, &t.exit, z)?))
    } else {
        None
    };
    let conditioned = if opts.conditioned {
        let pi2 = match row_pi {
            Some(p) => p,
            None => stochasticize_row(&g)?.pi,
        };
        Some(weigh(conditioned_chain(&c, &g, &pi2)?.pi))
    } else {
        None
    };
    let t4 = clock();
    timings.bounds = t4 - t3;
    timings.total = t4 - t0;

    Ok(Analysis {
        k_size: k,
        a_size: t.len(),
        deleted_state: z,
        min_row_sum,
        max_deficit,
        bounds: reports,
        tv,
        distributions,
        exit,
        conditioned,
        timings,
    })
}

/// Bounds on equilibrium expectations of a jump process, computed on its
/// embedded chain. Rewards are given per unit time; `r ≥ λ` is required off
/// `K` unless `expert_skip` is set.
pub fn ctmc_expectation_bounds<J: JumpLyapunov>(
    model: &Embedded<J>,
    t: &Truncation<J::State>,
    cert: &LyapunovCertificate,
    rewards: &[Reward<'_, J::State>],
    opts: &Options,
    expert_skip: bool,
    clock: &dyn Fn() -> f64,
) -> Result<Analysis> {
    let outside: Vec<J::State> = t.space.states()[t.k_size()..].to_vec();
    check_reward_dominates_rate(&model.inner, &|x| model.inner.r(x), &outside, expert_skip)?;
    analyze(model, t, cert, rewards, opts, clock)
}

/// `Σ_x |a(x) - b(x)| w(x)`.
pub fn weighted_l1(a: &[f64], b: &[f64], w: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .zip(w)
        .map(|((p, q), w)| (p - q).abs() * w)
        .sum()
}

/// `π̃ w` for a distribution over `A`.
pub fn expectation(pi: &[f64], w: &[f64]) -> f64 {
    dot(pi, w)
}
