//! Jump processes through their embedded chain.
//!
//! A process with rate matrix `Q` and exit rates `λ(x) = -Q(x,x)` is handled
//! by the discrete pipeline applied to `R(x,y) = Q(x,y)/λ(x)` with every reward
//! `w` replaced by `w̃ = w/λ`. In particular the unit reward becomes `ẽ = 1/λ`,
//! and equilibrium expectations of the process are `κ(f̃)/κ(ẽ)`.

use alloc::format;
use alloc::vec::Vec;
use core::fmt::Debug;

use crate::linalg::DenseMatrix;
use crate::lyapunov::{moment_from_excess, DriftReport, Lyapunov, MomentCertificate};
use crate::state::Model;
use crate::{Error, Result};

/// Tolerance on `|Σ_y Q(x,y)|` for dense generators.
pub const GENERATOR_TOL: f64 = 1e-12;

/// A continuous-time chain given by its off-diagonal rates.
pub trait JumpModel {
    type State: Clone + Ord + Debug;

    /// Appends the off-diagonal rates `(y, Q(x,y))`, `y ≠ x`, to `out`.
    fn rates(&self, x: &Self::State, out: &mut Vec<(Self::State, f64)>);

    /// `λ(x) = Σ_{y≠x} Q(x,y)`.
    fn exit_rate(&self, x: &Self::State) -> f64 {
        let mut buf = Vec::new();
        self.rates(x, &mut buf);
        buf.iter().map(|e| e.1).sum()
    }
}

/// Lyapunov data in generator form: `Σ_{y∉K} Q(x,y) g1(y) ≤ -r(x)` and
/// `Σ_{y∉K} Q(x,y) g2(y) ≤ -1` for `x ∉ K`.
pub trait JumpLyapunov: JumpModel {
    fn g1(&self, x: &Self::State) -> f64;
    fn g2(&self, x: &Self::State) -> f64;
    fn r(&self, x: &Self::State) -> f64;
    fn radii(&self) -> (u64, u64);
    fn core(&self) -> Vec<Self::State>;
}

/// The embedded chain of a jump model, usable wherever a [`Model`] is.
#[derive(Debug, Clone)]
pub struct Embedded<J> {
    pub inner: J,
}

impl<J> Embedded<J> {
    pub fn new(inner: J) -> Self {
        Self { inner }
    }
}

impl<J: JumpModel> Model for Embedded<J> {
    type State = J::State;

    /// Rows `R(x,·) = Q(x,·)/λ(x)`. An absorbing state yields an empty row,
    /// which enumeration rejects.
    fn transitions(&self, x: &J::State, out: &mut Vec<(J::State, f64)>) {
        let start = out.len();
        self.inner.rates(x, out);
        let lambda: f64 = out[start..].iter().map(|e| e.1).sum();
        if lambda > 0.0 {
            for e in &mut out[start..] {
                e.1 /= lambda;
            }
        }
    }
}

impl<J: JumpLyapunov> Lyapunov for Embedded<J> {
    fn g1(&self, x: &J::State) -> f64 {
        self.inner.g1(x)
    }
    fn g2(&self, x: &J::State) -> f64 {
        self.inner.g2(x)
    }
    fn r(&self, x: &J::State) -> f64 {
        self.inner.r(x) / self.inner.exit_rate(x)
    }
    fn unit(&self, x: &J::State) -> f64 {
        1.0 / self.inner.exit_rate(x)
    }
    fn radii(&self) -> (u64, u64) {
        self.inner.radii()
    }
    fn core(&self) -> Vec<J::State> {
        self.inner.core()
    }
}

/// Embedded transition matrix and exit rates of a dense generator.
pub fn embed(q: &DenseMatrix) -> Result<(DenseMatrix, Vec<f64>)> {
    let n = q.nrows();
    if q.ncols() != n {
        return Err(Error::Dimension("generator must be square".into()));
    }
    let mut r = DenseMatrix::zeros(n, n);
    let mut lambda = Vec::with_capacity(n);
    for x in 0..n {
        let row = q.row(x);
        let mut off = 0.0;
        for (y, &v) in row.iter().enumerate() {
            if y != x {
                if !(v >= 0.0) || !v.is_finite() {
                    return Err(Error::InvalidRow {
                        state: format!("{x}"),
                        reason: format!("off-diagonal rate {v}"),
                    });
                }
                off += v;
            }
        }
        if (off + row[x]).abs() > GENERATOR_TOL * off.max(1.0) {
            return Err(Error::InvalidRow {
                state: format!("{x}"),
                reason: format!("generator row sums to {}", off + row[x]),
            });
        }
        if !(off > 0.0) {
            return Err(Error::InvalidRow {
                state: format!("{x}"),
                reason: "absorbing state (zero exit rate)".into(),
            });
        }
        for y in 0..n {
            if y != x {
                r[(x, y)] = row[y] / off;
            }
        }
        lambda.push(off);
    }
    Ok((r, lambda))
}

/// `f̃(x) = f(x)/λ(x)`.
pub fn transform_reward(f: &[f64], lambda: &[f64]) -> Vec<f64> {
    f.iter().zip(lambda).map(|(a, l)| a / l).collect()
}

/// Equilibrium distribution of the process from that of its embedded chain:
/// `ν(x) ∝ π(x)/λ(x)`.
pub fn nu_from_embedded(pi: &[f64], lambda: &[f64]) -> Vec<f64> {
    let mut nu = transform_reward(pi, lambda);
    let s: f64 = nu.iter().sum();
    nu.iter_mut().for_each(|v| *v /= s);
    nu
}

/// Drift reports in both generator and embedded form.
#[derive(Debug, Clone, PartialEq)]
pub struct CtmcDriftReport<S> {
    /// Margins `-slack(x) - Σ_{y∉K} Q(x,y) g(y)`.
    pub q_form: DriftReport<S>,
    /// Margins `g(x) - slack(x)/λ(x) - Σ_{y∉K} R(x,y) g(y)`.
    pub r_form: DriftReport<S>,
    /// The two forms flag exactly the same states.
    pub forms_agree: bool,
}

/// Checks `Σ_{y∉K} Q(x,y) g(y) ≤ -slack(x)` on `region - K`, where the sum
/// includes the diagonal term `-λ(x) g(x)`.
pub fn verify_ctmc_drift<J, I>(
    model: &J,
    g: &dyn Fn(&J::State) -> f64,
    slack: &dyn Fn(&J::State) -> f64,
    in_k: &dyn Fn(&J::State) -> bool,
    region: I,
) -> Result<CtmcDriftReport<J::State>>
where
    J: JumpModel,
    I: IntoIterator<Item = J::State>,
{
    let mut q = empty_report();
    let mut r = empty_report();
    let mut buf = Vec::new();
    for x in region {
        if in_k(&x) {
            continue;
        }
        buf.clear();
        model.rates(&x, &mut buf);
        let lambda: f64 = buf.iter().map(|e| e.1).sum();
        let gx = g(&x);
        let sx = slack(&x);
        let mut flow = 0.0;
        for (y, rate) in &buf {
            if !in_k(y) {
                let gy = g(y);
                if !gy.is_finite() {
                    return Err(Error::NonFinite(format!("Lyapunov function at {y:?}")));
                }
                flow += rate * gy;
            }
        }
        if !gx.is_finite() || !sx.is_finite() || !(lambda > 0.0) {
            return Err(Error::NonFinite(format!("drift terms at {x:?}")));
        }
        let mq = -sx - (flow - lambda * gx);
        let mr = gx - sx / lambda - flow / lambda;
        record(&mut q, &x, mq);
        record(&mut r, &x, mr);
    }
    let forms_agree = q.violations.len() == r.violations.len()
        && q.violations
            .iter()
            .zip(&r.violations)
            .all(|(a, b)| a.0 == b.0);
    Ok(CtmcDriftReport {
        q_form: q,
        r_form: r,
        forms_agree,
    })
}

fn empty_report<S>() -> DriftReport<S> {
    DriftReport {
        checked: 0,
        violations: Vec::new(),
        worst_margin: f64::INFINITY,
        worst_state: None,
    }
}

fn record<S: Clone>(rep: &mut DriftReport<S>, x: &S, margin: f64) {
    rep.checked += 1;
    if margin < rep.worst_margin {
        rep.worst_margin = margin;
        rep.worst_state = Some(x.clone());
    }
    if margin < 0.0 {
        rep.violations.push((x.clone(), margin));
    }
}

/// Requires `r(x) ≥ λ(x)` on `states`, which makes the embedded chain's
/// reward drift certify positive recurrence. With `expert_skip` the check is
/// bypassed and a warning logged.
pub fn check_reward_dominates_rate<J: JumpModel>(
    model: &J,
    r: &dyn Fn(&J::State) -> f64,
    states: &[J::State],
    expert_skip: bool,
) -> Result<()> {
    if expert_skip {
        log::warn!("skipping the r ≥ λ requirement for the jump process (expert flag)");
        return Ok(());
    }
    for x in states {
        if r(x) < model.exit_rate(x) {
            return Err(Error::RewardBelowRate(format!("{x:?}")));
        }
    }
    Ok(())
}

/// `c = max(0, max_{x ∈ core} (Q g3)(x) + w(x))`.
pub fn moment_bound_ctmc<J, I>(
    model: &J,
    g3: &dyn Fn(&J::State) -> f64,
    w: &dyn Fn(&J::State) -> f64,
    core: I,
    n3: u64,
) -> Result<MomentCertificate>
where
    J: JumpModel,
    I: IntoIterator<Item = J::State>,
{
    let mut buf = Vec::new();
    moment_from_excess(core, n3, |x| {
        buf.clear();
        model.rates(x, &mut buf);
        let gx = g3(x);
        Ok(buf.iter().map(|(y, q)| q * (g3(y) - gx)).sum::<f64>() + w(x))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn two_state_embedding() {
        let q = DenseMatrix::from_rows(&[&[-1.0, 1.0], &[2.0, -2.0]]);
        let (r, l) = embed(&q).unwrap();
        assert_eq!(r.as_slice(), &[0.0, 1.0, 1.0, 0.0]);
        assert_eq!(l, vec![1.0, 2.0]);
        // π = (1/2, 1/2) for R, so ν ∝ (1/2, 1/4)
        let nu = nu_from_embedded(&[0.5, 0.5], &l);
        assert_relative_eq!(nu[0], 2.0 / 3.0, epsilon = 1e-15);
    }

    #[test]
    fn absorbing_state_is_rejected() {
        let q = DenseMatrix::from_rows(&[&[-1.0, 1.0], &[0.0, 0.0]]);
        assert!(embed(&q).is_err());
    }

    #[test]
    fn reward_transform() {
        assert_eq!(transform_reward(&[2.0, 3.0], &[2.0, 3.0]), vec![1.0, 1.0]);
        assert_eq!(transform_reward(&[0.0], &[5.0]), vec![0.0]);
    }
}
