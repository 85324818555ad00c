//! Stochastic toggle switch: two mutually repressing species with
//! production `λ/(1 + other)` and linear degradation `μ x_i`.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::ctmc::{moment_bound_ctmc, JumpLyapunov, JumpModel};
use crate::lyapunov::MomentCertificate;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Toggle {
    pub lambda: f64,
    pub mu: f64,
    /// Symmetric fixed point of the mean-field dynamics.
    pub xstar: f64,
}

/// Radii and drift coefficients of the toggle certificate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToggleConstants {
    pub xstar: f64,
    pub c0: f64,
    pub c1: f64,
    pub c2: f64,
    pub n1: u64,
    pub n2: u64,
}

impl Toggle {
    /// Rejects parameters whose fixed point `x*` falls below `1/2`, where the
    /// linear certificate no longer has negative drift.
    pub fn new(lambda: f64, mu: f64) -> Result<Self> {
        if !(lambda > 0.0 && mu > 0.0 && lambda.is_finite() && mu.is_finite()) {
            return Err(Error::InvalidArgument(
                "toggle rates must be positive".into(),
            ));
        }
        let xstar = (-mu + libm::sqrt(mu * mu + 4.0 * mu * lambda)) / (2.0 * mu);
        if xstar < 0.5 {
            return Err(Error::InvalidArgument(alloc::format!(
                "fixed point x* = {xstar} is below 1/2"
            )));
        }
        Ok(Self { lambda, mu, xstar })
    }

    /// `Q g1 ≤ -c2 s² + c1 s + c0` with `s = x1 + x2`.
    pub fn constants(&self) -> ToggleConstants {
        let (l, m, xs) = (self.lambda, self.mu, self.xstar);
        let c0 = 2.0 * l;
        let c1 = 1.0 + 2.0 * l + 2.0 * m * (2.0 * xs + 1.0);
        let c2 = 2.0 * m;
        let n1 = libm::ceil((c1 + libm::sqrt(c1 * c1 + 4.0 * c2 * c0 / 2.0)) / c2) as u64;
        let n2 = libm::ceil((2.0 * l + 4.0 * m * xs + 1.0) / m) as u64;
        ToggleConstants {
            xstar: xs,
            c0,
            c1,
            c2,
            n1,
            n2,
        }
    }

    /// Radius beyond which `Q(α g1) ≤ -c3 (x1 + x2)² `.
    pub fn n3(&self, alpha: f64, c3: f64) -> Result<u64> {
        let k = self.constants();
        let d = alpha * k.c2 / 2.0 - c3;
        if !(d > 0.0) {
            return Err(Error::InvalidArgument(
                "alpha c2 / 2 must exceed c3 for a moment radius".into(),
            ));
        }
        let b = alpha * k.c1;
        Ok(libm::ceil((b + libm::sqrt(b * b + 4.0 * d * alpha * k.c0)) / (2.0 * d)) as u64)
    }

    /// `π w ≤ c` for `w = c3 (x1+x2)²` via `g3 = α g1`, maximizing over
    /// `x1 + x2 ≤ n3`.
    pub fn moment_certificate(&self, alpha: f64, c3: f64) -> Result<MomentCertificate> {
        let n3 = self.n3(alpha, c3)?;
        let n = n3 as u32;
        let core = (0..=n).flat_map(move |a| (0..=n - a).map(move |b| [a, b]));
        moment_bound_ctmc(
            self,
            &|x: &[u32; 2]| alpha * self.g1(x),
            &|x: &[u32; 2]| {
                let s = (x[0] + x[1]) as f64;
                c3 * s * s
            },
            core,
            n3,
        )
    }

    /// All states with `x1 + x2 ≤ level`.
    pub fn simplex(level: u32) -> Vec<[u32; 2]> {
        let mut v = Vec::new();
        for a in 0..=level {
            for b in 0..=level - a {
                v.push([a, b]);
            }
        }
        v
    }
}

impl JumpModel for Toggle {
    type State = [u32; 2];

    fn rates(&self, x: &[u32; 2], out: &mut Vec<([u32; 2], f64)>) {
        let [a, b] = *x;
        out.push(([a + 1, b], self.lambda / (1.0 + b as f64)));
        out.push(([a, b + 1], self.lambda / (1.0 + a as f64)));
        if a > 0 {
            out.push(([a - 1, b], self.mu * a as f64));
        }
        if b > 0 {
            out.push(([a, b - 1], self.mu * b as f64));
        }
    }

    fn exit_rate(&self, x: &[u32; 2]) -> f64 {
        let (a, b) = (x[0] as f64, x[1] as f64);
        self.lambda / (1.0 + b) + self.lambda / (1.0 + a) + self.mu * (a + b)
    }
}

impl JumpLyapunov for Toggle {
    fn g1(&self, x: &[u32; 2]) -> f64 {
        let (a, b) = (x[0] as f64 - self.xstar, x[1] as f64 - self.xstar);
        a * a + b * b
    }
    fn g2(&self, x: &[u32; 2]) -> f64 {
        (x[0] as f64 - self.xstar).abs() + (x[1] as f64 - self.xstar).abs()
    }
    fn r(&self, x: &[u32; 2]) -> f64 {
        (x[0] + x[1]) as f64
    }
    fn radii(&self) -> (u64, u64) {
        let k = self.constants();
        (k.n1, k.n2)
    }
    /// `{x1 + x2 < max(n1, n2)}`.
    fn core(&self) -> Vec<[u32; 2]> {
        let (n1, n2) = self.radii();
        Self::simplex(n1.max(n2) as u32 - 1)
    }
}
