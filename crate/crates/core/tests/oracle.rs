//! Randomized comparison of the truncation pipeline against dense oracles on
//! finite hosts.

mod common;

use common::{on_host, random_sets, weighted_tv, Host};
use ktrunc_core::bounds::kappa_upper;
use ktrunc_core::bounds::Stochasticity;
use ktrunc_core::censor::{compute_g, kappa_lower, Censoring};
use ktrunc_core::ctmc::{embed, nu_from_embedded};
use ktrunc_core::linalg::{stationary_small, DenseMatrix};
use ktrunc_core::lyapunov::{
    compute_h, moment_bound, tail_mass_bound, Envelope, LyapunovCertificate,
};
use ktrunc_core::pipeline::{analyze, Options, Reward};
use ktrunc_core::Error;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn options() -> Options {
    Options {
        methods: vec![Stochasticity::RowNormalized, Stochasticity::Perron],
        ..Options::default()
    }
}

fn host_strategy() -> impl Strategy<Value = (u64, usize)> {
    (any::<u64>(), 2usize..=30)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn g_matches_schur_complement((seed, n) in host_strategy()) {
        let host = Host::random(seed, n, 0.6);
        let (k, a) = random_sets(seed, n, false);
        let (_, t, _) = host.setup(&k, &a, 1e-9);
        let c = Censoring::new(&t).unwrap();
        let g = c.g_unchecked();
        let oracle = host.schur(&k, &a);
        for i in 0..k.len() {
            for j in 0..k.len() {
                prop_assert!((g[(i, j)] - oracle[(i, j)]).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn full_truncation_recovers_expectations((seed, n) in host_strategy()) {
        let host = Host::random(seed, n, 0.6);
        let (k, a) = random_sets(seed, n, true);
        let (model, t, cert) = host.setup(&k, &a, 1e-9);
        let pi = host.stationary();
        let pr: f64 = pi.iter().zip(&host.r).map(|(p, r)| p * r).sum();
        let an = analyze(&model, &t, &cert, &[Reward::lyapunov()], &options(), &|| 0.0).unwrap();
        for m in [Stochasticity::RowNormalized, Stochasticity::Perron] {
            let b = an.bound("r", m).unwrap();
            prop_assert!((b.approx - pr).abs() <= 1e-10 * pr, "{m:?}: {} vs {pr}", b.approx);
            prop_assert!(b.lower <= pr && pr <= b.upper);
        }
    }

    #[test]
    fn bounds_contain_truth_on_partial_truncations((seed, n) in host_strategy()) {
        let host = Host::random(seed, n, 0.6);
        let (k, a) = random_sets(seed, n, false);
        let (model, t, cert) = host.setup(&k, &a, 1e-9);
        let res = analyze(&model, &t, &cert, &[Reward::lyapunov(), Reward::unit()], &options(), &|| 0.0);
        let an = match res {
            Err(Error::GReducible { .. } | Error::ZeroRowSum(_)) => return Ok(()),
            other => other.unwrap(),
        };
        let pi = host.stationary();
        let pr: f64 = pi.iter().zip(&host.r).map(|(p, r)| p * r).sum();
        let b = an.bound("r", Stochasticity::RowNormalized).unwrap();
        prop_assert!(b.lower <= pr && pr <= b.upper, "{} {} {}", b.lower, pr, b.upper);
        prop_assert!((b.approx - pr).abs() <= b.approx_error.unwrap());
        let e = an.bound("e", Stochasticity::RowNormalized).unwrap();
        prop_assert!(e.lower <= 1.0 && 1.0 <= e.upper);

        let ones = vec![1.0; n];
        for m in [Stochasticity::RowNormalized, Stochasticity::Perron] {
            let approx = on_host(&t, an.distribution(m).unwrap(), n);
            let tv_r = weighted_tv(&approx, &pi, &host.r);
            let tv_e = weighted_tv(&approx, &pi, &ones);
            prop_assert!(tv_r <= an.tv_bound(Envelope::Reward, m).unwrap(), "{m:?} r");
            prop_assert!(tv_e <= an.tv_bound(Envelope::Unit, m).unwrap(), "{m:?} e");
        }
    }

    #[test]
    fn exit_approximation_matches_singleton_approximation((seed, n) in host_strategy()) {
        let host = Host::random(seed, n, 0.6);
        let (_, a) = random_sets(seed, n, false);
        prop_assume!(a.len() < n);
        let z = a[seed as usize % a.len()];
        let (model, t, cert) = host.setup(&[z], &a, 1e-9);
        let opts = Options { exit_approximation: true, ..Options::default() };
        let an = match analyze(&model, &t, &cert, &[], &opts, &|| 0.0) {
            Err(Error::ZeroRowSum(_)) => return Ok(()),
            other => other.unwrap(),
        };
        let pi2 = an.distribution(Stochasticity::RowNormalized).unwrap();
        for (x, y) in an.exit.as_ref().unwrap().iter().zip(pi2) {
            prop_assert!((x - y).abs() <= 1e-11);
        }
    }

    #[test]
    fn embedded_chain_recovers_generator_equilibrium((seed, n) in host_strategy()) {
        let host = Host::random(seed, n, 0.6);
        // Q = diag(λ)(P - I) with P having zero diagonal
        let mut q = DenseMatrix::zeros(n, n);
        for x in 0..n {
            let lambda = host.r[x];
            let off: f64 = (0..n).filter(|&y| y != x).map(|y| host.p[x][y]).sum();
            for y in 0..n {
                if y != x {
                    q[(x, y)] = lambda * host.p[x][y] / off;
                }
            }
            q[(x, x)] = -(0..n).filter(|&y| y != x).map(|y| q[(x, y)]).sum::<f64>();
        }
        let (rmat, lambda) = embed(&q).unwrap();
        let nu = nu_from_embedded(&stationary_small(&rmat).unwrap(), &lambda);
        // direct ν Q = 0 with Σ ν = 1
        let mut m = DMatrix::from_fn(n, n, |i, j| q[(j, i)]);
        for j in 0..n {
            m[(n - 1, j)] = 1.0;
        }
        let mut b = DVector::zeros(n);
        b[n - 1] = 1.0;
        let direct = m.lu().solve(&b).unwrap();
        for x in 0..n {
            prop_assert!((nu[x] - direct[x]).abs() <= 1e-10);
        }
    }

    #[test]
    fn reward_envelope_brackets_return_reward((seed, n) in host_strategy()) {
        let host = Host::random(seed, n, 0.6);
        let (k, a) = random_sets(seed, n, false);
        let mut in_k = vec![false; n];
        k.iter().for_each(|&x| in_k[x] = true);
        let truth = host.kappa(&in_k, &host.r);
        let (_, t, cert) = host.setup(&k, &a, 1e-6);
        let c = Censoring::new(&t).unwrap();
        let r = t.space.map(|x| host.r[*x as usize]);
        let kl = kappa_lower(&c, &r).unwrap();
        let ku = kappa_upper(&c, &cert, Envelope::Reward, &kl).unwrap();
        // the same certificate carrying the exact excursion reward outside A
        let g1 = host.excursion(&in_k, &host.r);
        let exact = LyapunovCertificate { h1: compute_h(&t, |y| g1[*y as usize]).unwrap(), ..cert };
        let ke = kappa_upper(&c, &exact, Envelope::Reward, &kl).unwrap();
        for (i, tr) in truth.iter().enumerate() {
            prop_assert!(kl[i] <= tr * (1.0 + 1e-12) && tr * (1.0 - 1e-12) <= ku[i]);
            prop_assert!((ke[i] - tr).abs() <= 1e-9 * tr, "{} vs {tr}", ke[i]);
        }
    }

    #[test]
    fn overflow_shrinks_as_a_grows((seed, n) in host_strategy()) {
        let host = Host::random(seed, n, 0.6);
        let (k, a) = random_sets(seed, n, false);
        let mut bigger = a.clone();
        bigger.extend((0..n).filter(|x| !a.contains(x)).take(2));
        bigger.sort();
        let (_, small_t, small) = host.setup(&k, &a, 1e-9);
        let (_, big_t, big) = host.setup(&k, &bigger, 1e-9);
        let sc = Censoring::new(&small_t).unwrap();
        let bc = Censoring::new(&big_t).unwrap();
        let (bs, bb) = (sc.through(&small.h1), bc.through(&big.h1));
        for i in 0..k.len() {
            prop_assert!(bb[i] <= bs[i] * (1.0 + 1e-12) + 1e-300);
        }
    }

    #[test]
    fn moment_certificate_is_tight_for_poisson_solution((seed, n) in host_strategy()) {
        // g3 solving g3 - P g3 = w - π w gives c = π w
        let host = Host::random(seed, n, 0.6);
        let pi = host.stationary();
        let w: Vec<f64> = host.r.iter().map(|r| r * r).collect();
        let pw: f64 = pi.iter().zip(&w).map(|(p, w)| p * w).sum();
        let mut in_k = vec![false; n];
        in_k[0] = true;
        let centred: Vec<f64> = w.iter().map(|v| v - pw).collect();
        let g3 = host.excursion(&in_k, &centred);
        let shift = g3.iter().cloned().fold(0.0, f64::min);
        let g3: Vec<f64> = g3.iter().map(|v| v - shift).collect();
        let model = host.model(&in_k, 0.0);
        let m = moment_bound(&model, &|x| g3[*x as usize], &|x| w[*x as usize], 0..n as u32, n as u64).unwrap();
        prop_assert!((m.c - pw).abs() <= 1e-9 * pw, "{} vs {pw}", m.c);
        prop_assert_eq!(m.checked, n);
        let s = w.iter().cloned().fold(f64::INFINITY, f64::min);
        prop_assert!(tail_mass_bound(m.c, s) <= 1.0);
    }

    #[test]
    fn lower_cycle_reward_never_exceeds_truth((seed, n) in host_strategy()) {
        let host = Host::random(seed, n, 0.6);
        let (k, a) = random_sets(seed, n, false);
        let (_, t, _) = host.setup(&k, &a, 1e-9);
        let c = Censoring::new(&t).unwrap();
        let r = t.space.map(|x| host.r[*x as usize]);
        let kl = kappa_lower(&c, &r).unwrap();
        let mut in_k = vec![false; n];
        k.iter().for_each(|&x| in_k[x] = true);
        let truth = host.kappa(&in_k, &host.r);
        for (lo, tr) in kl.iter().zip(&truth) {
            prop_assert!(*lo <= tr * (1.0 + 1e-12));
        }
    }
}

#[test]
fn reducible_g_is_reported() {
    // 0 ↔ 1 only through state 2, which is cut off by A = {0, 1}
    let host = Host {
        p: std::sync::Arc::new(vec![
            vec![0.5, 0.0, 0.5],
            vec![0.0, 0.5, 0.5],
            vec![0.5, 0.5, 0.0],
        ]),
        r: vec![1.0; 3],
    };
    let (_, t, _) = host.setup(&[0, 1], &[0, 1], 1e-9);
    let c = Censoring::new(&t).unwrap();
    assert!(matches!(
        compute_g(&c),
        Err(Error::GReducible { classes: 2 })
    ));
}

#[test]
fn random_partial_truncations_are_mostly_admissible() {
    let mut ran = 0;
    for seed in 0..200u64 {
        let n = 2 + (seed as usize % 29);
        let host = Host::random(seed, n, 0.6);
        let (k, a) = random_sets(seed, n, false);
        let (model, t, cert) = host.setup(&k, &a, 1e-9);
        if analyze(
            &model,
            &t,
            &cert,
            &[Reward::lyapunov()],
            &options(),
            &|| 0.0,
        )
        .is_ok()
        {
            ran += 1;
        }
    }
    assert!(
        ran >= 180,
        "only {ran} of 200 random truncations were admissible"
    );
}
