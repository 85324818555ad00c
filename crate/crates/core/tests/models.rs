//! Built-in models against their user-defined counterparts and basic shape
//! checks.

use ktrunc_core::ctmc::{Embedded, JumpModel};
use ktrunc_core::lyapunov::{certify, Lyapunov};
use ktrunc_core::models::{Gm1, Toggle, UserModel};
use ktrunc_core::pipeline::{analyze, Analysis, Options, Reward};
use ktrunc_core::state::{enumerate, Model, DEFAULT_STATE_CAP};
use ktrunc_core::Error;

fn wrap(q: Gm1) -> UserModel<u32> {
    let (g1, g2, r) = (q.clone(), q.clone(), q.clone());
    let radii = q.radii();
    let core = q.core();
    UserModel::new(move |x: &u32, out: &mut Vec<(u32, f64)>| q.transitions(x, out)).with_lyapunov(
        move |x| g1.g1(x),
        move |x| g2.g2(x),
        move |x| r.r(x),
        radii,
        core,
    )
}

fn run<L: Lyapunov<State = u32>>(model: &L) -> Analysis {
    let t = enumerate(model, 0, |x| *x <= 2000, |x| *x <= 201, DEFAULT_STATE_CAP).unwrap();
    let cert = certify(model, &t).unwrap();
    analyze(
        model,
        &t,
        &cert,
        &[Reward::lyapunov()],
        &Options::default(),
        &|| 0.0,
    )
    .unwrap()
}

#[test]
fn user_model_reproduces_builtin_gm1_bitwise() {
    let q = Gm1::standard();
    let user = wrap(q.clone());
    let a = run(&q);
    let b = run(&user);
    assert_eq!(a.bounds, b.bounds);
    assert_eq!(a.tv, b.tv);
    assert_eq!(a.distributions, b.distributions);
}

#[test]
fn row_with_excess_mass_is_rejected() {
    let bad = UserModel::new(|x: &u32, out: &mut Vec<(u32, f64)>| {
        out.push((x + 1, 0.6));
        out.push((x.saturating_sub(1), 0.5));
    });
    let err = enumerate(&bad, 0, |x| *x <= 10, |x| *x == 0, DEFAULT_STATE_CAP).unwrap_err();
    assert!(matches!(err, Error::InvalidRow { .. }), "{err:?}");
}

#[test]
fn toggle_generator_rows_sum_to_zero() {
    let tg = Toggle::new(20.0, 1.0).unwrap();
    let mut buf = Vec::new();
    for x in Toggle::simplex(40) {
        buf.clear();
        tg.rates(&x, &mut buf);
        let out: f64 = buf.iter().filter(|(y, _)| *y != x).map(|(_, q)| q).sum();
        assert!((out - tg.exit_rate(&x)).abs() <= 1e-12 * out.max(1.0));
    }
}

#[test]
fn embedded_toggle_rows_are_stochastic() {
    let tg = Embedded::new(Toggle::new(90.0, 1.0).unwrap());
    let mut buf = Vec::new();
    for x in Toggle::simplex(30) {
        buf.clear();
        tg.transitions(&x, &mut buf);
        let s: f64 = buf.iter().map(|(_, p)| p).sum();
        assert!((s - 1.0).abs() <= 1e-14);
    }
}
