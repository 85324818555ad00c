//! Builds the configured model and runs the stages shared by every command.

use std::fmt::Debug;
use std::time::Instant;

use ktrunc_core::ctmc::{check_reward_dominates_rate, Embedded, JumpLyapunov};
use ktrunc_core::lyapunov::{
    certify, construct_k, Lyapunov, LyapunovCertificate, MomentCertificate,
};
use ktrunc_core::models::{Gm1, Toggle, UserModel};
use ktrunc_core::pipeline::{analyze, Analysis, Reward};
use ktrunc_core::state::{enumerate, Truncation};
use serde_json::{json, Value};

use crate::config::{
    Config, Gm1Params, MatrixParams, Offset, ReturnSetMode, RewardName, ToggleParams,
    TruncationKind,
};
use crate::error::{config_err, Result};

/// States written to reports as coordinate lists.
pub trait Coords: Clone + Ord + Debug {
    fn coords(&self) -> Vec<u32>;
    fn from_coords(c: &[u32]) -> Option<Self>;
}

impl Coords for u32 {
    fn coords(&self) -> Vec<u32> {
        vec![*self]
    }
    fn from_coords(c: &[u32]) -> Option<Self> {
        match c {
            [x] => Some(*x),
            _ => None,
        }
    }
}

impl Coords for [u32; 2] {
    fn coords(&self) -> Vec<u32> {
        self.to_vec()
    }
    fn from_coords(c: &[u32]) -> Option<Self> {
        match c {
            [a, b] => Some([*a, *b]),
            _ => None,
        }
    }
}

type Pred<S> = Box<dyn Fn(Option<u32>, &S) -> bool>;
type Check<S> = Box<dyn Fn(&Truncation<S>) -> ktrunc_core::Result<()>>;
type Moment = Box<dyn Fn() -> ktrunc_core::Result<MomentCertificate>>;

/// A model with everything the commands need to drive it.
pub struct Instance<L: Lyapunov> {
    pub model: L,
    pub seed: L::State,
    /// Membership in `A` for a given size.
    pub in_a: Pred<L::State>,
    /// Extra assumption checks on the truncation before analysis.
    pub precheck: Option<Check<L::State>>,
    /// Analytic constants printed by `verify`.
    pub constants: Value,
    pub moment: Option<Moment>,
}

/// Wall-clock seconds per stage outside the core analysis.
#[derive(Debug, Clone, Copy, Default)]
pub struct Setup {
    pub enumerate: f64,
    pub certify: f64,
}

/// One truncation, certified and analyzed.
pub struct Outcome<S> {
    pub k: Vec<S>,
    pub truncation: Truncation<S>,
    pub certificate: LyapunovCertificate,
    pub analysis: Analysis,
    pub setup: Setup,
}

pub fn gm1_instance(p: &Gm1Params) -> Result<Instance<Gm1>> {
    let mut q = Gm1::with_constants(p.mu, p.b, p.c1, p.c2)?;
    match &p.g2_offset {
        Some(Offset::Value(d)) => q = q.with_g2_offset(*d),
        Some(Offset::Named(_)) => {
            let d = q.singleton_g2_offset()?;
            q = q.with_g2_offset(d);
        }
        None => {}
    }
    let k = q.constants()?;
    let constants = json!({
        "ev": k.ev,
        "n1": k.n1,
        "n2": k.n2,
        "k_star": k.k_star,
        "g2_offset": q.g2_offset,
    });
    let moment: Option<Moment> = p.moment_c3.map(|c3| {
        let q = q.clone();
        Box::new(move || q.moment_certificate(c3)) as Moment
    });
    Ok(Instance {
        model: q,
        seed: 0,
        in_a: Box::new(|size, x| size.is_none_or(|s| *x <= s)),
        precheck: None,
        constants,
        moment,
    })
}

pub fn toggle_instance(p: &ToggleParams) -> Result<Instance<Embedded<Toggle>>> {
    let tg = Toggle::new(p.lambda, p.mu)?;
    let k = tg.constants();
    let constants = json!({
        "xstar": k.xstar,
        "c0": k.c0,
        "c1": k.c1,
        "c2": k.c2,
        "n1": k.n1,
        "n2": k.n2,
    });
    let moment: Option<Moment> = p.moment.map(|m| {
        let tg = tg.clone();
        Box::new(move || tg.moment_certificate(m.alpha, m.c3)) as Moment
    });
    let model = Embedded::new(tg.clone());
    let skip = p.skip_rate_check;
    let precheck: Check<[u32; 2]> = Box::new(move |t: &Truncation<[u32; 2]>| {
        let outside = &t.space.states()[t.k_size()..];
        check_reward_dominates_rate(&tg, &|x| tg.r(x), outside, skip)
    });
    Ok(Instance {
        model,
        seed: [0, 0],
        in_a: Box::new(|size, x| size.is_none_or(|s| x[0] + x[1] <= s)),
        precheck: Some(precheck),
        constants,
        moment,
    })
}

pub fn matrix_instance(p: &MatrixParams) -> Result<Instance<UserModel<u32>>> {
    let n = p.rows.len();
    let rows = p.rows.clone();
    let r = p.r.clone().unwrap_or_else(|| vec![1.0; n]);
    let g1 = p.g1.clone().unwrap_or_else(|| vec![0.0; n]);
    let g2 = p.g2.clone().unwrap_or_else(|| vec![0.0; n]);
    let model = UserModel::new(move |x: &u32, out: &mut Vec<(u32, f64)>| {
        for (y, v) in rows[*x as usize].iter().enumerate() {
            if *v != 0.0 {
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
    );
    let last = (n - 1) as u32;
    Ok(Instance {
        model,
        seed: 0,
        in_a: Box::new(move |size, x| *x <= size.unwrap_or(last).min(last)),
        precheck: None,
        constants: json!({ "states": n }),
        moment: None,
    })
}

/// The truncation size for `run`: `size`, or `None` for the whole space.
pub fn run_size(cfg: &Config) -> Result<Option<u32>> {
    match (cfg.truncation.kind, cfg.truncation.size) {
        (TruncationKind::All, _) => Ok(None),
        (_, Some(s)) => Ok(Some(s)),
        (_, None) => Err(config_err("run needs truncation.size")),
    }
}

impl<L> Instance<L>
where
    L: Lyapunov,
    L::State: Coords,
{
    /// `K` from the config, sorted.
    pub fn return_set(&self, cfg: &Config) -> Result<Vec<L::State>> {
        match cfg.return_set.mode {
            ReturnSetMode::Lyapunov => Ok(construct_k(&self.model)?),
            ReturnSetMode::Explicit => {
                let mut k = Vec::with_capacity(cfg.return_set.states.len());
                for c in &cfg.return_set.states {
                    let x = L::State::from_coords(c)
                        .ok_or_else(|| config_err(format!("bad return-set state {c:?}")))?;
                    k.push(x);
                }
                k.sort();
                k.dedup();
                Ok(k)
            }
        }
    }

    pub fn truncate(
        &self,
        cfg: &Config,
        size: Option<u32>,
        k: &[L::State],
    ) -> Result<Truncation<L::State>> {
        if k.is_empty() {
            return Err(ktrunc_core::Error::EmptyReturnSet.into());
        }
        if let Some(x) = k.iter().find(|x| !(self.in_a)(size, x)) {
            return Err(config_err(format!(
                "return-set state {:?} lies outside A (size {size:?}); enlarge the truncation",
                x.coords()
            )));
        }
        Ok(enumerate(
            &self.model,
            self.seed.clone(),
            |x| (self.in_a)(size, x),
            |x| k.binary_search(x).is_ok(),
            cfg.truncation.cap,
        )?)
    }

    /// Return set, truncation, certificate and analysis for one size.
    pub fn solve(
        &self,
        cfg: &Config,
        size: Option<u32>,
        k: &[L::State],
    ) -> Result<Outcome<L::State>> {
        let start = Instant::now();
        let t = self.truncate(cfg, size, k)?;
        let t1 = start.elapsed().as_secs_f64();
        let certificate = certify(&self.model, &t)?;
        let t2 = start.elapsed().as_secs_f64();
        if let Some(check) = &self.precheck {
            check(&t)?;
        }
        let rewards: Vec<Reward<'_, L::State>> = cfg
            .bounds
            .rewards
            .iter()
            .map(|r| match r {
                RewardName::R => Reward::lyapunov(),
                RewardName::E => Reward::unit(),
            })
            .collect();
        let clock = move || start.elapsed().as_secs_f64();
        let analysis = analyze(
            &self.model,
            &t,
            &certificate,
            &rewards,
            &cfg.bounds.options(),
            &clock,
        )?;
        Ok(Outcome {
            k: k.to_vec(),
            truncation: t,
            certificate,
            analysis,
            setup: Setup {
                enumerate: t1,
                certify: t2 - t1,
            },
        })
    }
}

/// Dispatches `$body` with `$inst` bound to the configured model's instance.
#[macro_export]
macro_rules! with_instance {
    ($cfg:expr, $inst:ident => $body:expr) => {
        match &$cfg.model {
            $crate::config::ModelConfig::Gm1(p) => {
                let $inst = $crate::problem::gm1_instance(p)?;
                $body
            }
            $crate::config::ModelConfig::Toggle(p) => {
                let $inst = $crate::problem::toggle_instance(p)?;
                $body
            }
            $crate::config::ModelConfig::Matrix(p) => {
                let $inst = $crate::problem::matrix_instance(p)?;
                $body
            }
        }
    };
}
