//! Drift certificates: verification, return-set construction, overflow
//! vectors and moment bounds.
//!
//! A certificate consists of a reward-drift function `g1` and a time-drift
//! function `g2` with
//!
//! ```text
//! Σ_{y ∉ K} P(x,y) g1(y) ≤ g1(x) - r(x)
//! Σ_{y ∉ K} P(x,y) g2(y) ≤ g2(x) - e(x)        for x ∉ K,
//! ```
//!
//! where `e ≡ 1` for a discrete-time chain (and `1/λ` for the embedded chain
//! of a jump process). Models prove the inequalities by hand outside a finite
//! core; the library re-checks the core numerically.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::Debug;

use serde::{Deserialize, Serialize};

use crate::state::{Model, Truncation};
use crate::{Error, Result};

/// Lyapunov data attached to a model.
pub trait Lyapunov: Model {
    /// Reward-drift function `g1`.
    fn g1(&self, x: &Self::State) -> f64;
    /// Time-drift function `g2`.
    fn g2(&self, x: &Self::State) -> f64;
    /// Envelope reward `r`, the slack of `g1`.
    fn r(&self, x: &Self::State) -> f64;
    /// Slack of `g2`: one step of time.
    fn unit(&self, _x: &Self::State) -> f64 {
        1.0
    }
    /// Radii `(n1, n2)` beyond which the model proves drift analytically.
    fn radii(&self) -> (u64, u64);
    /// The finite set of states inside `max(n1, n2)`, where drift must be
    /// checked numerically.
    fn core(&self) -> Vec<Self::State>;
}

/// Outcome of a numerical drift check.
#[derive(Debug, Clone, PartialEq)]
pub struct DriftReport<S> {
    pub checked: usize,
    /// Violating states with their (negative) margins, in the order checked.
    pub violations: Vec<(S, f64)>,
    /// Smallest margin `g(x) - slack(x) - Σ_{y∉K} P(x,y) g(y)` seen.
    pub worst_margin: f64,
    pub worst_state: Option<S>,
}

impl<S> DriftReport<S> {
    pub fn is_verified(&self) -> bool {
        self.violations.is_empty()
    }
}

/// `Σ_{y : keep(y)} P(x,y) g(y)`, failing when `g` is not finite on a
/// reached state.
pub fn one_step<M: Model>(
    model: &M,
    x: &M::State,
    g: &dyn Fn(&M::State) -> f64,
    keep: &dyn Fn(&M::State) -> bool,
    buf: &mut Vec<(M::State, f64)>,
) -> Result<f64> {
    buf.clear();
    model.transitions(x, buf);
    let mut s = 0.0;
    for (y, p) in buf.iter() {
        if keep(y) {
            let v = g(y);
            if !v.is_finite() {
                return Err(Error::NonFinite(format!("Lyapunov function at {y:?}")));
            }
            s += p * v;
        }
    }
    Ok(s)
}

/// Checks `Σ_{y ∉ K} P(x,y) g(y) ≤ g(x) - slack(x)` on every `x ∈ region - K`.
///
/// A state violates when its margin is below `-tol · (g(x) + slack(x) + Σ)`;
/// `tol = 0` is the strict check.
pub fn verify_drift<M, I>(
    model: &M,
    g: &dyn Fn(&M::State) -> f64,
    slack: &dyn Fn(&M::State) -> f64,
    in_k: &dyn Fn(&M::State) -> bool,
    region: I,
    tol: f64,
) -> Result<DriftReport<M::State>>
where
    M: Model,
    I: IntoIterator<Item = M::State>,
{
    let mut report = DriftReport {
        checked: 0,
        violations: Vec::new(),
        worst_margin: f64::INFINITY,
        worst_state: None,
    };
    let outside = |y: &M::State| !in_k(y);
    let mut buf = Vec::new();
    for x in region {
        if in_k(&x) {
            continue;
        }
        let gx = g(&x);
        let sx = slack(&x);
        if !gx.is_finite() || !sx.is_finite() {
            return Err(Error::NonFinite(format!("Lyapunov function at {x:?}")));
        }
        let s = one_step(model, &x, g, &outside, &mut buf)?;
        let margin = gx - sx - s;
        report.checked += 1;
        if margin < report.worst_margin {
            report.worst_margin = margin;
            report.worst_state = Some(x.clone());
        }
        if margin < -tol * (gx.abs() + sx.abs() + s.abs()) {
            report.violations.push((x, margin));
        }
    }
    Ok(report)
}

/// The return set: states of the core where either drift inequality fails
/// with the full one-step sum, sorted by the state order.
pub fn construct_k<L: Lyapunov>(model: &L) -> Result<Vec<L::State>> {
    let core = model.core();
    let total = core.len();
    let all = |_: &L::State| true;
    let mut buf = Vec::new();
    let mut k = Vec::new();
    for x in core {
        let p1 = one_step(model, &x, &|y| model.g1(y), &all, &mut buf)?;
        let p2 = one_step(model, &x, &|y| model.g2(y), &all, &mut buf)?;
        let e1 = p1 - model.g1(&x) + model.r(&x);
        let e2 = p2 - model.g2(&x) + model.unit(&x);
        if !e1.is_finite() || !e2.is_finite() {
            return Err(Error::NonFinite(format!("drift at {x:?}")));
        }
        if e1 > 0.0 || e2 > 0.0 {
            k.push(x);
        }
    }
    if k.is_empty() {
        log::warn!("drift holds on the whole core; the return set is empty");
    } else if total > 0 && k.len() == total {
        return Err(Error::DriftViolated {
            count: total,
            first: format!("{:?}", k[0]),
        });
    }
    k.sort();
    Ok(k)
}

/// `h(x) = Σ_{y ∉ A} P(x,y) g(y)` from the boundary rows, exactly.
pub fn compute_h<S, F>(t: &Truncation<S>, g: F) -> Result<Vec<f64>>
where
    S: Clone + Ord + Debug,
    F: Fn(&S) -> f64,
{
    let mut bad = None;
    let h = t.boundary_sum(|y| {
        let v = g(y);
        if !v.is_finite() || v < 0.0 {
            bad.get_or_insert_with(|| format!("{y:?}"));
        }
        v
    });
    match bad {
        Some(s) => Err(Error::NonFinite(format!(
            "Lyapunov function outside A at {s}"
        ))),
        None => Ok(h),
    }
}

/// Overflow vector from a model-supplied upper bound `bound(x) ≥ Σ_{y∉A} P(x,y) g(y)`.
/// States without boundary transitions get `0`.
pub fn compute_h_bounded<S, F>(t: &Truncation<S>, bound: F) -> Result<Vec<f64>>
where
    S: Clone + Ord + Debug,
    F: Fn(&S) -> f64,
{
    let mut out = Vec::with_capacity(t.len());
    for (i, x) in t.space.states().iter().enumerate() {
        if t.partition.boundary_rows[i].is_empty() {
            out.push(0.0);
            continue;
        }
        let v = bound(x);
        if !v.is_finite() || v < 0.0 {
            return Err(Error::NonFinite(format!("overflow bound at {x:?}")));
        }
        out.push(v);
    }
    Ok(out)
}

/// A verified certificate evaluated on a truncation, ready for the bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LyapunovCertificate {
    pub n1: u64,
    pub n2: u64,
    pub k_size: usize,
    /// Number of core states outside `K` checked numerically.
    pub checked: usize,
    /// Smallest drift margins seen; `None` when no state was checked.
    pub worst_margin_g1: Option<f64>,
    pub worst_margin_g2: Option<f64>,
    /// `g1`, `g2` over `A` in index order.
    pub g1: Vec<f64>,
    pub g2: Vec<f64>,
    /// Overflow vectors over `A`.
    pub h1: Vec<f64>,
    pub h2: Vec<f64>,
    /// Drift of `g2` (unit slack) holds off `K`; required by every bound.
    pub verified: bool,
    /// Drift of `g1` (reward slack) holds off `K`; required for `r`-weighted bounds.
    pub reward_verified: bool,
    /// States off `K` where the `g1` drift fails, in core order.
    pub reward_violations: usize,
    pub first_reward_violation: Option<String>,
}

impl LyapunovCertificate {
    /// Refuses an unverified certificate.
    pub fn require_verified(&self) -> Result<&Self> {
        if self.verified {
            Ok(self)
        } else {
            Err(Error::Unverified)
        }
    }

    /// Refuses an envelope whose drift inequality was not verified.
    pub fn require_envelope(&self, envelope: Envelope) -> Result<&Self> {
        self.require_verified()?;
        if envelope == Envelope::Reward && !self.reward_verified {
            return Err(Error::DriftViolated {
                count: self.reward_violations,
                first: self.first_reward_violation.clone().unwrap_or_default(),
            });
        }
        Ok(self)
    }

    /// The overflow pair for an envelope: `(h1, h2)` for `r`, `(h2, h2)` for
    /// the unit reward.
    pub fn overflow(&self, envelope: Envelope) -> (&[f64], &[f64]) {
        match envelope {
            Envelope::Reward => (&self.h1, &self.h2),
            Envelope::Unit => (&self.h2, &self.h2),
        }
    }
}

/// Which dominating reward a bound is stated for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Envelope {
    /// `|f| ≤ r`, certified by `g1`.
    Reward,
    /// `|f| ≤ e`, certified by `g2` (plain total variation).
    Unit,
}

/// Verifies drift of `model` on `core - K` for the `K` of `t` and evaluates the
/// overflow vectors.
///
/// A failing `g2` drift is an error. A failing `g1` drift only withdraws the
/// `r`-weighted envelope, since plain bounds need `g2` alone.
pub fn certify<L: Lyapunov>(model: &L, t: &Truncation<L::State>) -> Result<LyapunovCertificate> {
    let k = t.k_size();
    let in_k = |x: &L::State| t.space.index_of(x).is_some_and(|i| i < k);
    let core = model.core();
    let d1 = verify_drift(
        model,
        &|x| model.g1(x),
        &|x| model.r(x),
        &in_k,
        core.iter().cloned(),
        0.0,
    )?;
    let d2 = verify_drift(
        model,
        &|x| model.g2(x),
        &|x| model.unit(x),
        &in_k,
        core,
        0.0,
    )?;
    if let Some((x, _)) = d2.violations.first() {
        return Err(Error::DriftViolated {
            count: d2.violations.len(),
            first: format!("{x:?}"),
        });
    }
    if let Some((x, _)) = d1.violations.first() {
        log::warn!(
            "g1 drift fails at {} states off K (first {x:?}); only unit-envelope bounds are certified",
            d1.violations.len()
        );
    }
    let (n1, n2) = model.radii();
    Ok(LyapunovCertificate {
        n1,
        n2,
        k_size: k,
        checked: d1.checked,
        worst_margin_g1: d1.worst_state.as_ref().map(|_| d1.worst_margin),
        worst_margin_g2: d2.worst_state.as_ref().map(|_| d2.worst_margin),
        g1: t.space.map(|x| model.g1(x)),
        g2: t.space.map(|x| model.g2(x)),
        h1: compute_h(t, |y| model.g1(y))?,
        h2: compute_h(t, |y| model.g2(y))?,
        verified: true,
        reward_verified: d1.violations.is_empty(),
        reward_violations: d1.violations.len(),
        first_reward_violation: d1.violations.first().map(|(x, _)| format!("{x:?}")),
    })
}

/// A bound `π w ≤ c` from `(P g3)(x) ≤ g3(x) - w(x) + c` on a finite core.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentCertificate {
    pub n3: u64,
    pub c: f64,
    /// Number of core states examined.
    pub checked: usize,
}

/// `c = max(0, max_{x ∈ core} (P g3)(x) - g3(x) + w(x))`.
pub fn moment_bound<M, I>(
    model: &M,
    g3: &dyn Fn(&M::State) -> f64,
    w: &dyn Fn(&M::State) -> f64,
    core: I,
    n3: u64,
) -> Result<MomentCertificate>
where
    M: Model,
    I: IntoIterator<Item = M::State>,
{
    let all = |_: &M::State| true;
    let mut buf = Vec::new();
    moment_from_excess(core, n3, |x| {
        Ok(one_step(model, x, g3, &all, &mut buf)? - g3(x) + w(x))
    })
}

pub(crate) fn moment_from_excess<S: Debug, I: IntoIterator<Item = S>>(
    core: I,
    n3: u64,
    mut excess: impl FnMut(&S) -> Result<f64>,
) -> Result<MomentCertificate> {
    let mut c = 0.0f64;
    let mut checked = 0;
    for x in core {
        let v = excess(&x)?;
        if !v.is_finite() {
            return Err(Error::NonFinite(format!("moment drift at {x:?}")));
        }
        c = c.max(v);
        checked += 1;
    }
    Ok(MomentCertificate { n3, c, checked })
}

/// Lower bound `1 - c/s` on `π(A)` from `π w ≤ c` and `w ≥ s` off `A`.
pub fn tail_mass_bound(c: f64, s: f64) -> f64 {
    if s > 0.0 {
        (1.0 - c / s).max(0.0)
    } else {
        0.0
    }
}
