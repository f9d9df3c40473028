use brwlab::brw::{
    enumerate_toy_trees, gibbs_check, many_to_one_check, many_to_one_exact_report, martingale_check, minimum_samples,
    minimum_tail_report, ray_statistic, simulate_spine_tree, simulate_tree, spine_check, stopping_line,
    stopping_lines_with_w, toy_w1_law, toy_walk_paths, RayWindow, StatsRequest, TreeMode, PathFunctional,
    DEFAULT_POP_CAP,
};
use brwlab::model::{calibrate, discrete_toy_model, preset, schedule, OffspringLaw, StepLaw};
use brwlab::par::McConfig;
use brwlab::report::Verdict;
use brwlab::samplers::Sampler;
use brwlab::stats::median;
use brwlab::{CalibratedModel, RngStream};

fn p1() -> CalibratedModel {
    calibrate(&preset("p1").unwrap()).unwrap()
}

fn toy_law() -> brwlab::model::ToyLaw {
    match discrete_toy_model().law {
        StepLaw::Toy(t) => t,
        _ => unreachable!(),
    }
}

#[test]
fn toy_w1_has_three_values_with_mean_one() {
    let law = toy_w1_law(&toy_law());
    assert_eq!(law.len(), 3);
    assert!((law.iter().map(|(_, p)| p).sum::<f64>() - 1.0).abs() < 1e-15);
    let mean: f64 = law.iter().map(|(w, p)| w * p).sum();
    assert!((mean - 1.0).abs() < 1e-15);
}

#[test]
fn toy_depth_three_enumeration() {
    let law = toy_law();
    let trees = enumerate_toy_trees(&law, 3).unwrap();
    assert!(trees.iter().all(|t| t.generations[3].len() == 8));
    assert!((trees.iter().map(|t| t.prob).sum::<f64>() - 1.0).abs() < 1e-12);
    let paths = toy_walk_paths(&law, 3);
    assert_eq!(paths.len(), 8);
}

#[test]
fn toy_many_to_one_at_generation_two() {
    let law = toy_law();
    // E[sum_{|u|=2} e^{-V(u)} 1{V(u) <= 0}] = P(S_2 <= 0)
    let tree_side: f64 = enumerate_toy_trees(&law, 2)
        .unwrap()
        .iter()
        .map(|t| t.prob * t.generations[2].iter().filter(|&&v| v <= 0.0).map(|v| (-v).exp()).sum::<f64>())
        .sum();
    let walk_side: f64 = toy_walk_paths(&law, 2).iter().filter(|(p, _)| p[1] <= 0.0).map(|(_, q)| q).sum();
    assert!((tree_side - walk_side).abs() <= 1e-12);
}

#[test]
fn toy_exact_report_passes_at_three() {
    let r = many_to_one_exact_report(&discrete_toy_model(), 3, 1e-12).unwrap();
    assert_eq!(r.rows.len(), 5);
    assert!(r.rows.iter().all(|row| row.verdict == Verdict::ExactPass && row.ratio <= 1e-12), "{r:?}");
}

#[test]
fn toy_gibbs_chi_square() {
    let toy = discrete_toy_model();
    for n in [1, 2] {
        let r = gibbs_check(&toy, n, 10, &McConfig::new(100_000, 31)).unwrap();
        assert!(r.passed(), "{r:?}");
    }
}

#[test]
fn calibrated_gibbs_binned() {
    let r = gibbs_check(&p1(), 1, 10, &McConfig::new(100_000, 32)).unwrap();
    assert!(r.passed(), "{r:?}");
}

#[test]
fn many_to_one_monte_carlo_on_p1() {
    let m = p1();
    let battery = PathFunctional::battery(&m, 8).unwrap();
    let r = many_to_one_check(&m, 8, &battery, &McConfig::new(50_000, 33)).unwrap();
    assert!(r.passed(), "{r:?}");
}

#[test]
fn martingale_mean_one() {
    let r = martingale_check(&p1(), &[10, 50], &McConfig::new(4_000, 34)).unwrap();
    assert!(r.passed(), "{r:?}");
    let r = martingale_check(&discrete_toy_model(), &[5], &McConfig::new(4_000, 35)).unwrap();
    assert!(r.passed(), "{r:?}");
}

#[test]
fn change_of_measure_and_spine_law() {
    let r = spine_check(&p1(), 8, 10, 1e-3, &McConfig::new(20_000, 36)).unwrap();
    assert!(r.passed(), "{r:?}");
}

#[test]
fn generation_summaries_are_consistent() {
    let m = p1();
    let req = StatsRequest { extremal: true, ray_windows: vec![] };
    let mut rng = RngStream::new(37, 0);
    let run = simulate_tree(&m, 60, TreeMode::FullGenealogy, &req, &mut rng, DEFAULT_POP_CAP).unwrap();
    assert_eq!(run.summaries.len(), 61);
    for s in &run.summaries {
        assert!(s.pop > 0);
        assert!(s.w >= (-s.min_position).exp());
        assert!((run.tree.w(s.n).unwrap() - s.w).abs() <= 1e-12 * s.w);
        if let Some(e) = &s.extremal {
            let alpha = schedule(&m, s.n).unwrap().alpha_n;
            assert_eq!(e.len(), s.pop);
            assert!(e.atoms().windows(2).all(|w| w[0] <= w[1]));
            assert!((e.min().unwrap() - (s.min_position - alpha)).abs() < 1e-12);
        }
    }
    // paths end at the node position and start from a root child
    let last = run.tree.generation(60).unwrap();
    let path = run.tree.path(60, 0);
    assert_eq!(*path.last().unwrap(), last[0]);
}

#[test]
fn frontier_mode_agrees_with_full_genealogy() {
    let m = p1();
    let req = StatsRequest::default();
    let a = simulate_tree(&m, 40, TreeMode::FullGenealogy, &req, &mut RngStream::new(38, 1), DEFAULT_POP_CAP).unwrap();
    let b = simulate_tree(&m, 40, TreeMode::FrontierOnly, &req, &mut RngStream::new(38, 1), DEFAULT_POP_CAP).unwrap();
    assert_eq!(a.summaries, b.summaries);
    assert_eq!(b.tree.generations.len(), 1);
    assert_eq!(a.tree.generation(40), b.tree.generation(40));
}

#[test]
fn spine_is_a_lineage() {
    let m = p1();
    let run = simulate_spine_tree(&m, 30, &mut RngStream::new(39, 0), DEFAULT_POP_CAP).unwrap();
    assert_eq!(run.spine_nodes.len(), 31);
    assert_eq!(run.spine_nodes[0], 0);
    for k in 1..=30 {
        let node = run.tree.node(k, run.spine_nodes[k]).unwrap();
        assert_eq!(node.parent, Some(run.spine_nodes[k - 1] as u32));
        assert_eq!(node.position, run.spine_positions[k]);
    }
}

#[test]
fn capacity_is_reported() {
    let m = calibrate(&preset("p2-walk").unwrap()).unwrap();
    let err = simulate_tree(&m, 10, TreeMode::FrontierOnly, &StatsRequest::default(), &mut RngStream::new(40, 0), 1_000);
    assert!(err.unwrap_err().is_capacity());
}

#[test]
fn single_lineage_ray_statistic_is_the_walk_maximum() {
    let mut m = p1();
    m.offspring = OffspringLaw::TwoPoint { k: 1, p: 1.0 };
    let b = m.spec().unwrap().b;
    let n = 40;
    let s = ray_statistic(&m, n, 0.5, &mut RngStream::new(41, 0), DEFAULT_POP_CAP).unwrap();
    // replay the same draws: one uniform for the count, then the displacement
    let mut rng = RngStream::new(41, 0);
    let sampler = Sampler::new(&m);
    let mut v = 0.0;
    let mut best = f64::NEG_INFINITY;
    for k in 1..=n {
        rng.uniform();
        v += sampler.y(&mut rng).unwrap();
        if k >= 20 {
            best = best.max(v / (k as f64).powf(1.0 / (2.0 - b)));
        }
    }
    assert_eq!(s, best);
}

#[test]
fn wider_ray_window_never_lowers_the_statistic() {
    let m = p1();
    let windows = vec![RayWindow { n: 60, eps: 0.5 }, RayWindow { n: 60, eps: 0.25 }];
    let req = StatsRequest { extremal: false, ray_windows: windows };
    for rep in 0..20 {
        let mut rng = RngStream::new(42, rep);
        let mut narrow = None;
        let mut wide = None;
        brwlab::brw::grow(
            &m,
            brwlab::brw::GrowConfig::new(60, brwlab::brw::Measure::P).windows(&req.ray_windows),
            &mut rng,
            &mut |g: &brwlab::brw::Generation| {
                if g.n == 60 {
                    narrow = Some(g.ray_stat(0));
                    wide = Some(g.ray_stat(1));
                }
                Ok(())
            },
        )
        .unwrap();
        assert!(wide.unwrap() >= narrow.unwrap());
    }
}

#[test]
fn minimum_scale_and_lower_tail() {
    let m = p1();
    let (samples, lost) = minimum_samples(&m, 200, &McConfig::new(500, 43)).unwrap();
    assert_eq!(lost, 0);
    let alpha = schedule(&m, 200).unwrap().alpha_n;
    let sp = m.spec().unwrap();
    let scale = sp.lambda * (m.m * 200.0).powf(sp.b);
    let ratios: Vec<f64> = samples.iter().map(|(c, _)| (c + alpha) / scale).collect();
    let med = median(&ratios);
    assert!(med > 0.5 && med < 2.0, "median {med}");
    assert!(samples.iter().all(|(c, w)| c.is_finite() && *w >= (-(c + alpha)).exp()));
    let r = minimum_tail_report(&samples, 200, &[2.0, 4.0, 6.0], 20.0);
    assert!(r.passed(), "{r:?}");
}

#[test]
fn stopping_lines() {
    let m = p1();
    let line = stopping_line(&m, 1.0, &mut RngStream::new(44, 0), 10_000, DEFAULT_POP_CAP).unwrap();
    assert!(line.atoms.atoms().iter().all(|&v| v >= 1.0));
    assert!((line.w - line.atoms.integrate(|v| (-v).exp())).abs() < 1e-12);
    assert!(stopping_line(&m, 0.0, &mut RngStream::new(44, 0), 10, DEFAULT_POP_CAP).is_err());

    let (sums, w) = stopping_lines_with_w(&m, &[0.5, 1.0], 150, &mut RngStream::new(45, 0), DEFAULT_POP_CAP).unwrap();
    assert!(w > 0.0);
    for s in sums.into_iter().flatten() {
        assert!(s > 0.0);
    }
}
