use brwlab::model::{calibrate, preset};
use brwlab::par::McConfig;
use brwlab::report::Verdict;
use brwlab::rwalk::{
    jump_times, local_interval_estimates, one_jump_estimates, renewal_r, simulate_walk, tail_asymptote, tail_prob,
    two_jump_closed_form, verify_mgf_bound, verify_two_jump_bound, JumpFunctional,
};
use brwlab::stats::EstimateWithError;
use brwlab::{CalibratedModel, RngStream};

fn model(name: &str) -> CalibratedModel {
    calibrate(&preset(name).unwrap()).unwrap()
}

#[test]
fn walk_mean_tracks_drift() {
    let m = model("p1");
    let n = 200;
    let ends: Vec<f64> = (0..10_000u64)
        .map(|r| {
            let mut rng = RngStream::new(21, r);
            let w = simulate_walk(&m, n, &mut rng);
            assert_eq!(w.sums[0], 0.0);
            w.sums[n] / n as f64
        })
        .collect();
    let e = EstimateWithError::from_samples(&ends);
    assert!(e.within(m.m, 4.0), "{e:?} vs {}", m.m);
}

#[test]
fn jump_times_thresholds() {
    let steps = [1.0, -5.0, 2.0, -7.0];
    let j = jump_times(&steps, 3.0);
    assert_eq!((j.tau1, j.tau2), (Some(2), Some(4)));
    let j = jump_times(&steps, 10.0);
    assert_eq!((j.tau1, j.tau2), (None, None));
    let j = jump_times(&steps, 6.0);
    assert_eq!((j.tau1, j.tau2), (Some(4), None));
}

#[test]
fn tail_matches_leading_asymptote_deep_in_the_tail() {
    for name in ["p1", "p3-heavy"] {
        let m = model(name);
        let sp = m.spec().unwrap();
        for k in [25.0, 30.0, 40.0, 60.0] {
            let t = (k / sp.lambda).powf(1.0 / sp.b);
            let r = tail_prob(&m, t).unwrap() / tail_asymptote(&m, t).unwrap();
            assert!((0.9..=1.1).contains(&r), "{name} at lambda t^b = {k}: {r}");
        }
    }
}

#[test]
fn tail_is_monotone_and_continuous_at_the_cutoff() {
    let m = model("p1");
    let x0 = m.spec().unwrap().x0.abs();
    let mut prev = 1.0;
    for i in 0..400 {
        let t = 0.01 * i as f64;
        let p = tail_prob(&m, t).unwrap();
        assert!(p <= prev + 1e-12);
        prev = p;
    }
    let below = tail_prob(&m, x0 - 1e-9).unwrap();
    let at = tail_prob(&m, x0).unwrap();
    assert!((below - at).abs() < 1e-8);
}

#[test]
fn renewal_function_basics() {
    let m = model("p1");
    let mc = McConfig::new(4_000, 22);
    assert_eq!(renewal_r(&m, -0.5, 200, &mc).unwrap().estimate.value, 0.0);
    let mut prev: Option<EstimateWithError> = None;
    for x in [0.0, 0.5, 1.0, 2.0] {
        let r = renewal_r(&m, x, 400, &mc).unwrap();
        assert!(r.estimate.value >= 1.0);
        assert!(r.truncation_bound.is_finite());
        if let Some(p) = prev {
            assert!(r.estimate.value >= p.value - 2.0 * p.se.hypot(r.estimate.se));
        }
        prev = Some(r.estimate);
    }
}

#[test]
fn two_jump_closed_form_edges() {
    assert_eq!(two_jump_closed_form(0.3, 1), 0.0);
    assert_eq!(two_jump_closed_form(0.0, 100), 0.0);
    let p: f64 = 0.01;
    let direct = 1.0 - (1.0 - p).powi(50) - 50.0 * p * (1.0 - p).powi(49);
    assert!((two_jump_closed_form(p, 50) - direct).abs() < 1e-14);
}

#[test]
fn two_jump_monte_carlo_matches_closed_form() {
    let m = model("p1");
    let r = verify_two_jump_bound(&m, 100, Some(1.0), &McConfig::new(100_000, 23)).unwrap();
    let mc = r.rows_named("two_jump_mc").next().unwrap();
    assert_eq!(mc.verdict, Verdict::Pass, "{r:?}");
    assert!(r.rows_named("two_jump_closed_form").all(|row| row.verdict == Verdict::Pass));
}

#[test]
fn mgf_excess_is_positive_on_the_walk_preset() {
    let m = model("p2-walk");
    let r = verify_mgf_bound(&m, &[100, 200, 400]).unwrap();
    let rows: Vec<_> = r.rows_named("mgf_excess").collect();
    assert_eq!(rows.len(), 3);
    assert!(rows.iter().all(|row| row.estimate > 0.0));
    let spread = r.rows_named("mgf_ratio_spread").next().unwrap();
    assert!(spread.estimate < 10.0);
}

#[test]
fn local_interval_estimators_agree() {
    let m = model("p1");
    let mc = McConfig::new(40_000, 24);
    for y in [-1.0, 0.0, 0.5] {
        let e = local_interval_estimates(&m, 30, y, 1.0, true, &mc).unwrap();
        let direct = e.direct.unwrap();
        assert!(direct.z_score(&e.importance) <= 4.0, "y = {y}: {direct:?} vs {:?}", e.importance);
    }
}

#[test]
fn one_jump_zero_functional_is_exactly_zero() {
    let m = model("p2-walk");
    let mc = McConfig::new(200, 25);
    let est = one_jump_estimates(&m, 150, 150, 0.0, &[JumpFunctional::Zero, JumpFunctional::ExpNeg], &mc).unwrap();
    assert_eq!(est[0].integrated.value, 0.0);
    assert_eq!(est[0].limit, 0.0);
    assert_eq!(est[1].limit, m.jump_constant().unwrap());
    let sp = m.spec().unwrap();
    assert_eq!(est[1].limit, sp.ell_inf * m.m.powf(sp.a));
}
