//! Invariants checked over seeded random inputs.

mod common;

use mwc::funcparse::{differentiate, parse};
use mwc::model::{model_from_json, model_to_json};
use mwc::oracle::EventKind;
use mwc::quad::f_hat;
use mwc::{
    check_conditions, classify_causal, connect, de_sitter_grw, integrate_geodesic, minkowski_strip,
    reissner_nordstrom_intermediate, schwarzschild_interior, verify_connection, CausalKind, ConnectOptions,
    ConnectionStatus, Problem, SpacetimeModel, StopSpec,
};
use proptest::prelude::*;
use rand::Rng;

fn rn() -> SpacetimeModel {
    reissner_nordstrom_intermediate(1.0, 0.6).expect("builtin")
}

fn is_timelike(model: &SpacetimeModel, tau0: f64, tau1: f64, l: &[f64]) -> bool {
    classify_causal(model, tau0, tau1, l).expect("classifies").kind == CausalKind::Timelike
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn printed_expressions_parse_back(seed in any::<u64>()) {
        let e = common::random_expr(&mut common::rng(seed), 6);
        let text = e.to_string();
        let back = parse(&text).map_err(|err| TestCaseError::fail(format!("{text}: {err}")))?;
        prop_assert_eq!(back, e, "{}", text);
    }

    #[test]
    fn derivative_matches_differences(seed in any::<u64>(), t in 0.3f64..2.5) {
        let e = common::random_smooth_expr(&mut common::rng(seed), 5);
        let de = differentiate(&e);
        let f = |x: f64| e.eval(x).ok().filter(|v| v.is_finite());
        let (Some(exact), Some(fd)) = (de.eval(t).ok().filter(|v| v.is_finite()), common::richardson(&f, t, 1e-3)) else {
            return Ok(());
        };
        // Differences are meaningless where the function is too steep or wild.
        let coarse = common::richardson(&f, t, 2e-3);
        prop_assume!(coarse.is_some_and(|c| (c - fd).abs() <= 1e-6 * (1.0 + fd.abs())));
        prop_assert!((exact - fd).abs() <= 1e-5 * (1.0 + fd.abs()), "{e}: exact {exact}, differences {fd}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn flat_causality_is_the_light_cone(
        tau0 in -5.0f64..5.0,
        dt in 0.0f64..4.0,
        l in prop::collection::vec(0.0f64..3.0, 1..4),
    ) {
        let model = minkowski_strip(f64::NEG_INFINITY, f64::INFINITY, l.len()).expect("builtin");
        let gap = dt * dt - l.iter().map(|x| x * x).sum::<f64>();
        prop_assume!(gap.abs() > 1e-6);
        prop_assert_eq!(is_timelike(&model, tau0, tau0 + dt, &l), gap > 0.0);
    }

    #[test]
    fn timelike_future_is_closed_under_later_times(
        tau0 in 0.2f64..2.5,
        dt in 0.01f64..0.5,
        more in 0.0f64..0.3,
        l in prop::collection::vec(0.0f64..0.5, 2),
    ) {
        let model = rn();
        let tau1 = tau0 + dt;
        prop_assume!(tau1 + more < 3.0);
        if is_timelike(&model, tau0, tau1, &l) {
            prop_assert!(is_timelike(&model, tau0, tau1 + more, &l));
        }
        // Shrinking the fiber distances cannot break a timelike relation either.
        if is_timelike(&model, tau0, tau1, &l) {
            let shorter: Vec<f64> = l.iter().map(|x| x * 0.5).collect();
            prop_assert!(is_timelike(&model, tau0, tau1, &shorter));
        }
    }

    #[test]
    fn reversed_geodesic_retraces(seed in any::<u64>(), tau0 in 0.5f64..2.6, t_end in 0.05f64..0.6) {
        let model = rn();
        let mut rng = common::rng(seed);
        let c = common::simplex_point(&mut rng, 2, 0.05);
        let f0 = f_hat(&model, &c, tau0).expect("potential");
        let d = f0 - common::log_uniform(&mut rng, 1e-3, 1.0 + f0.abs());
        let eps = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        let stop = StopSpec::duration(t_end);
        let fwd = integrate_geodesic(&model, &c, d, eps, tau0, &stop).expect("integrates");
        prop_assume!(fwd.count(EventKind::LeftInterval) == 0 && fwd.count(EventKind::Diverged) == 0);
        let end = fwd.samples.last().expect("samples");
        prop_assume!((end.t - t_end).abs() < 1e-12 && end.dtau.abs() > 1e-3);

        let back = integrate_geodesic(&model, &c, d, -end.dtau.signum(), end.tau, &stop).expect("integrates");
        let last = back.samples.last().expect("samples");
        prop_assert!((last.tau - tau0).abs() < 1e-6, "τ returns to {} instead of {tau0}", last.tau);
        for (r_back, r_fwd) in last.r.iter().zip(&end.r) {
            prop_assert!((r_back - r_fwd).abs() < 1e-6 * (1.0 + r_fwd.abs()));
        }
    }

    #[test]
    fn model_json_round_trip(tau in 0.05f64..3.09, keep_first in any::<bool>()) {
        let model = rn();
        let model = if keep_first { model.restrict(&[1, 0]).expect("restrict") } else { model };
        let again = model_from_json(&model_to_json(&model)).expect("reloads");
        prop_assert_eq!(again.n(), model.n());
        prop_assert_eq!(&again.interval, &model.interval);
        for i in 0..model.n() {
            prop_assert_eq!(again.warp(i, tau).unwrap(), model.warp(i, tau).unwrap());
            prop_assert_eq!(again.warp_deriv(i, tau).unwrap(), model.warp_deriv(i, tau).unwrap());
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn strip_connections_verify_and_respect_symmetry(
        tau0 in 0.05f64..0.95,
        tau1 in 0.05f64..0.95,
        l in prop::collection::vec(0.01f64..1.0, 2),
    ) {
        prop_assume!((tau1 - tau0).abs() > 1e-3);
        let model = minkowski_strip(0.0, 1.0, 2).expect("builtin");
        let opts = ConnectOptions { k_steps: Some(65), c_steps: Some(65), ..ConnectOptions::default() };
        let problem = Problem { tau0, tau1, l: l.clone() };
        let report = connect(&model, &problem, &opts).expect("runs");
        prop_assert_eq!(&report.problem, &problem);
        let ConnectionStatus::Connected { candidates } = &report.status else {
            // Every pair in a flat slab is joined by a straight chord.
            return Err(TestCaseError::fail(format!("{problem:?}: {:?}", report.status)));
        };
        for vc in candidates {
            prop_assert!(vc.verification.pass);
            prop_assert!(verify_connection(&model, &vc.candidate).expect("verifies").pass);
        }

        // Swapping the fibers swaps the coefficients.
        let swapped = Problem { tau0, tau1, l: vec![l[1], l[0]] };
        let other = connect(&model, &swapped, &opts).expect("runs");
        let ConnectionStatus::Connected { candidates: mirrored } = &other.status else {
            return Err(TestCaseError::fail(format!("{swapped:?}: {:?}", other.status)));
        };
        let (a, b) = (candidates[0].candidate.c_hat.as_slice(), mirrored[0].candidate.c_hat.as_slice());
        prop_assert!((a[0] - b[1]).abs() < 1e-6 && (a[1] - b[0]).abs() < 1e-6, "{a:?} vs {b:?}");
    }
}

#[test]
fn conditions_are_nested() {
    let models = [
        minkowski_strip(f64::NEG_INFINITY, f64::INFINITY, 2).unwrap(),
        minkowski_strip(0.0, 1.0, 3).unwrap(),
        de_sitter_grw().unwrap(),
        schwarzschild_interior(1.0).unwrap(),
        rn(),
    ];
    for m in &models {
        let r = check_conditions(m).expect("checks");
        assert!(!r.cond_24 || r.cond_28, "{r:?}");
        assert!(!r.cond_28 || r.cond_star, "{r:?}");
    }
}
