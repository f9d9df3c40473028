use std::sync::OnceLock;

use brwlab::brw::{grow, minimum_samples, simulate_tree, Generation, GrowConfig, Measure, RayWindow, StatsRequest, TreeMode, DEFAULT_POP_CAP};
use brwlab::limits::{limit_cdf, TestFunction};
use brwlab::model::{calibrate, preset, schedule};
use brwlab::par::McConfig;
use brwlab::rwalk::{jump_times, tail_prob, WalkPath};
use brwlab::{CalibratedModel, PointMeasure, RngStream};
use proptest::prelude::*;

fn p1() -> &'static CalibratedModel {
    static M: OnceLock<CalibratedModel> = OnceLock::new();
    M.get_or_init(|| calibrate(&preset("p1").unwrap()).unwrap())
}

fn test_function() -> impl Strategy<Value = TestFunction> {
    prop_oneof![
        (-3.0..3.0f64).prop_map(|x_right| TestFunction::HalfSpaceSmooth { x_right }),
        (-3.0..3.0f64, 0.1..3.0f64, 0.0..2.0f64).prop_map(|(center, width, height)| TestFunction::Bump { center, width, height }),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn point_measure_sorted_and_counted(atoms in prop::collection::vec(-50.0..50.0f64, 0..60), lo in -60.0..60.0f64, len in 0.0..40.0f64) {
        let m = PointMeasure::new(atoms.clone());
        prop_assert_eq!(m.len(), atoms.len());
        prop_assert!(m.atoms().windows(2).all(|w| w[0] <= w[1]));
        let hi = lo + len;
        let direct = atoms.iter().filter(|&&a| a >= lo && a <= hi).count();
        prop_assert_eq!(m.count_in(lo, hi), direct);
        prop_assert_eq!(m.restrict(lo, hi).len(), direct);
        let mut joined = m.clone();
        joined.extend(&m.shifted(1.0));
        prop_assert!(joined.atoms().windows(2).all(|w| w[0] <= w[1]));
        prop_assert_eq!(joined.len(), 2 * atoms.len());
    }

    #[test]
    fn walk_increments_are_the_steps(steps in prop::collection::vec(-20.0..20.0f64, 0..80)) {
        let w = WalkPath::from_steps(steps.clone());
        prop_assert_eq!(w.sums.len(), steps.len() + 1);
        prop_assert_eq!(w.sums[0], 0.0);
        for k in 1..=steps.len() {
            prop_assert!((w.sums[k] - w.sums[k - 1] - steps[k - 1]).abs() <= 1e-12 * (1.0 + w.sums[k].abs()));
        }
    }

    #[test]
    fn jump_times_order_and_monotonicity(steps in prop::collection::vec(-20.0..5.0f64, 0..60), z1 in 0.0..20.0f64, dz in 0.0..10.0f64) {
        let j = jump_times(&steps, z1);
        if let Some(t1) = j.tau1 {
            prop_assert!(steps[t1 - 1] < -z1);
            prop_assert!(steps[..t1 - 1].iter().all(|&x| x >= -z1));
            if let Some(t2) = j.tau2 {
                prop_assert!(t1 < t2);
                prop_assert!(steps[t2 - 1] < -z1);
            }
        } else {
            prop_assert!(j.tau2.is_none());
        }
        let raised = jump_times(&steps, z1 + dz);
        let key = |t: Option<usize>| t.unwrap_or(usize::MAX);
        prop_assert!(key(raised.tau1) >= key(j.tau1));
    }

    #[test]
    fn tail_probability_is_monotone(t in 0.0..200.0f64, dt in 0.0..50.0f64) {
        let a = tail_prob(p1(), t).unwrap();
        let b = tail_prob(p1(), t + dt).unwrap();
        prop_assert!(b <= a + 1e-12);
        prop_assert!((0.0..=1.0).contains(&a));
    }

    #[test]
    fn limit_cdf_is_monotone(ws in prop::collection::vec(0.0..5.0f64, 1..40), c in 0.01..5.0f64, x in -10.0..10.0f64, dx in 0.0..5.0f64) {
        let a = limit_cdf(c, &ws, x);
        let b = limit_cdf(c, &ws, x + dx);
        prop_assert!(b <= a + 1e-15);
        prop_assert!((0.0..=1.0).contains(&a));
    }

    #[test]
    fn test_function_shift_and_support(f in test_function(), x in -3.0..3.0f64, ys in prop::collection::vec(-8.0..8.0f64, 0..30)) {
        prop_assert!(f.validate().is_ok());
        let g = f.shifted(x);
        for &y in &ys {
            prop_assert!((g.eval(y) - f.eval(y + x)).abs() <= 1e-12);
            prop_assert!(f.eval(y) >= 0.0);
            if y >= f.support_right() {
                prop_assert_eq!(f.eval(y), 0.0);
            }
        }
        let mut sorted = ys.clone();
        sorted.sort_by(f64::total_cmp);
        let full: f64 = sorted.iter().map(|&y| f.eval(y)).sum();
        prop_assert!((f.sum_over(&sorted) - full).abs() <= 1e-12);
    }

    #[test]
    fn schedule_is_deterministic(n in 1usize..100_000) {
        let a = schedule(p1(), n).unwrap();
        let b = schedule(p1(), n).unwrap();
        prop_assert_eq!(a.alpha_n.to_bits(), b.alpha_n.to_bits());
        prop_assert_eq!(a.zeta_n.to_bits(), b.zeta_n.to_bits());
        prop_assert_eq!(a.theta_n.to_bits(), b.theta_n.to_bits());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn shorter_runs_are_prefixes(seed in any::<u64>(), stream in any::<u64>(), n in 1usize..40, extra in 1usize..20) {
        let req = StatsRequest::default();
        let short = simulate_tree(p1(), n, TreeMode::FrontierOnly, &req, &mut RngStream::new(seed, stream), DEFAULT_POP_CAP).unwrap();
        let long = simulate_tree(p1(), n + extra, TreeMode::FrontierOnly, &req, &mut RngStream::new(seed, stream), DEFAULT_POP_CAP).unwrap();
        prop_assert_eq!(&short.summaries[..], &long.summaries[..=n]);
    }

    #[test]
    fn additive_martingale_dominates_the_minimum(seed in any::<u64>(), n in 1usize..60) {
        let run = simulate_tree(p1(), n, TreeMode::FrontierOnly, &StatsRequest::default(), &mut RngStream::new(seed, 0), DEFAULT_POP_CAP).unwrap();
        for s in &run.summaries {
            prop_assert!(s.pop > 0);
            prop_assert!(s.w >= (-s.min_position).exp());
        }
    }

    #[test]
    fn widening_the_ray_window_never_lowers_it(seed in any::<u64>(), n in 10usize..50, e1 in 0.05..0.95f64, e2 in 0.05..0.95f64) {
        let (wide, narrow) = if e1 <= e2 { (e1, e2) } else { (e2, e1) };
        let windows = [RayWindow { n, eps: narrow }, RayWindow { n, eps: wide }];
        let mut stats = (0.0, 0.0);
        grow(p1(), GrowConfig::new(n, Measure::P).windows(&windows), &mut RngStream::new(seed, 1), &mut |g: &Generation| {
            if g.n == n {
                stats = (g.ray_stat(0), g.ray_stat(1));
            }
            Ok(())
        }).unwrap();
        prop_assert!(stats.1 >= stats.0);
    }

    #[test]
    fn worker_count_does_not_change_results(seed in any::<u64>(), workers in 2usize..6) {
        let one = minimum_samples(p1(), 15, &McConfig::new(12, seed).workers(1)).unwrap();
        let many = minimum_samples(p1(), 15, &McConfig::new(12, seed).workers(workers)).unwrap();
        prop_assert_eq!(one, many);
    }
}
