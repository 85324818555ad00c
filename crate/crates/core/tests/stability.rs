//! Accuracy of the subtraction-free paths when `G` is nearly stochastic.

mod common;

use common::{random_sets, Host};
use ktrunc_core::bounds::Stochasticity;
use ktrunc_core::censor::{deleted_state, tau_family, tau_family_direct, Censoring};
use ktrunc_core::lyapunov::certify;
use ktrunc_core::models::Gm1;
use ktrunc_core::pipeline::{analyze, Options, Reward};
use ktrunc_core::state::{enumerate, DEFAULT_STATE_CAP};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn deleted_state_tau_matches_inverse((seed, n) in (any::<u64>(), 3usize..=30)) {
        let host = Host::random(seed, n, 0.6);
        let (k, a) = random_sets(seed, n, false);
        prop_assume!(k.len() >= 2);
        let (_, t, _) = host.setup(&k, &a, 1e-9);
        let c = Censoring::new(&t).unwrap();
        let g = c.g_unchecked();
        let Ok(direct) = tau_family_direct(&g) else { return Ok(()) };
        let Ok(tau) = tau_family(&g, &c.deficit(), deleted_state(&g)) else { return Ok(()) };
        for x in 0..k.len() {
            for y in 0..k.len() {
                prop_assert!((tau[(x, y)] - direct[(x, y)]).abs() <= 1e-8);
            }
        }
    }
}

#[test]
fn deficits_are_exact_when_rows_are_nearly_stochastic() {
    // a long birth–death chain cut far out leaks almost nothing
    let host = Host::birth_death(60, 0.3);
    let k = [0, 1, 2];
    let a: Vec<usize> = (0..50).collect();
    let (_, t, _) = host.setup(&k, &a, 1e-9);
    let c = Censoring::new(&t).unwrap();
    let d = c.deficit();
    let sums = c.g_unchecked().row_sums();
    // only state 2 leaves K; it is killed when the walk from 3 reaches 50
    // before 2, a gambler's ruin with odds 2 over 48 steps
    assert_eq!(&d[..2], &[0.0, 0.0]);
    let ruin = 0.3 / (2f64.powi(48) - 1.0);
    assert!(
        (d[2] - ruin).abs() <= 1e-13 * ruin,
        "deficit {:e} vs {ruin:e}",
        d[2]
    );
    // 1 - row sum carries only a few correct digits of it
    assert!((1.0 - sums[2] - ruin).abs() > 1e-3 * ruin);
    let g = c.g_unchecked();
    let tau = tau_family(&g, &d, deleted_state(&g)).unwrap();
    for x in 0..3 {
        assert!((tau.row(x).iter().sum::<f64>() - 1.0).abs() <= 1e-14);
        assert!(tau.row(x).iter().all(|v| *v > 0.0));
    }
}

#[test]
fn gm1_large_truncation_is_stable() {
    let q = Gm1::standard();
    let kmax = q.constants().unwrap().k_star as u32;
    let t = enumerate(&q, 0, |x| *x <= 10_000, |x| *x <= kmax, DEFAULT_STATE_CAP).unwrap();
    let cert = certify(&q, &t).unwrap();
    let opts = Options {
        methods: vec![Stochasticity::RowNormalized, Stochasticity::Perron],
        ..Options::default()
    };
    let an = analyze(
        &q,
        &t,
        &cert,
        &[Reward::lyapunov(), Reward::unit()],
        &opts,
        &|| 0.0,
    )
    .unwrap();
    assert!(
        an.min_row_sum > 1.0 - 1e-9,
        "min row sum {}",
        an.min_row_sum
    );
    let exact = Gm1::geometric_mean(q.decay_gap().unwrap());
    for m in [Stochasticity::RowNormalized, Stochasticity::Perron] {
        let b = an.bound("r", m).unwrap();
        assert!(
            b.lower <= exact && exact <= b.upper,
            "{m:?}: [{}, {}] misses {exact}",
            b.lower,
            b.upper
        );
        assert!(
            (b.approx - exact).abs() <= 1e-12 * exact,
            "{m:?}: {} vs {exact}",
            b.approx
        );
        let e = an.bound("e", m).unwrap();
        assert!(e.lower <= 1.0 && 1.0 <= e.upper);
    }
}
