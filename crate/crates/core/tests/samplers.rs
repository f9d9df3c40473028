use brwlab::model::{build_spine_density, calibrate, discrete_toy_model, preset, ModelSpec, OffspringLaw};
use brwlab::rwalk::tail_prob;
use brwlab::samplers::{
    sample_brood, sample_offspring, sample_size_biased_brood, sample_x, sample_x_conditioned_big_jump, sample_x_left,
    sample_y,
};
use brwlab::special::upper_gamma_reg;
use brwlab::stats::{chi_square_gof, ks_one_sample, ks_two_sample, EstimateWithError};
use brwlab::{CalibratedModel, RngStream};

const LEVEL: f64 = 1e-3;

fn p1() -> CalibratedModel {
    calibrate(&preset("p1").unwrap()).unwrap()
}

fn mean_se(xs: &[f64]) -> EstimateWithError {
    EstimateWithError::from_samples(xs)
}

#[test]
fn left_branch_is_a_truncated_gamma() {
    let spec = ModelSpec {
        name: "gamma-check".into(),
        a: 0.0,
        lambda: 1.0,
        b: 0.5,
        x0: -1.0,
        ell_inf: 0.05,
        right_mu: 0.0,
        right_sigma: 0.1,
        offspring: OffspringLaw::ShiftedPoisson,
        target_mean_offspring: 1.05,
        right_mu_range: [-5.0, 5.0],
    };
    let d = build_spine_density(&spec).unwrap();
    assert_eq!(d.gamma_shape, 2.0);
    let mut rng = RngStream::new(11, 0);
    let xs: Vec<f64> = (0..100_000).map(|_| sample_x_left(&d, &mut rng)).collect();
    assert!(xs.iter().all(|&x| x <= -1.0));
    let w: Vec<f64> = xs.iter().map(|x| x.abs().sqrt()).collect();
    let q1 = upper_gamma_reg(2.0, 1.0);
    let ks = ks_one_sample(&w, |t| if t <= 1.0 { 0.0 } else { 1.0 - upper_gamma_reg(2.0, t) / q1 });
    assert!(ks.passes(LEVEL), "{ks:?}");
}

#[test]
fn spine_step_mean_matches_drift() {
    let m = p1();
    let mut rng = RngStream::new(12, 0);
    let xs: Vec<f64> = (0..1_000_000).map(|_| sample_x(&m, &mut rng)).collect();
    let e = mean_se(&xs);
    assert!(e.within(m.m, 4.0), "{e:?} vs {}", m.m);
}

#[test]
fn child_law_tilt_identity() {
    let m = p1();
    let d = m.density().unwrap();
    let x0 = d.spec.x0;
    let battery: Vec<(&str, Box<dyn Fn(f64) -> f64>)> = vec![
        ("left", Box::new(move |x| if x <= x0 { 1.0 } else { 0.0 })),
        ("nonpositive", Box::new(|x| if x <= 0.0 { 1.0 } else { 0.0 })),
        ("above_drift", Box::new(|x| if x > 0.05 { 1.0 } else { 0.0 })),
        ("gauss", Box::new(|x| (-x * x).exp())),
        ("capped_exp", Box::new(|x: f64| x.exp().min(1.0))),
    ];
    let n = 1_000_000;
    let mut rng = RngStream::new(13, 0);
    let ys: Vec<f64> = (0..n).map(|_| sample_y(&m, &mut rng).unwrap()).collect();
    let xs: Vec<f64> = (0..n).map(|_| sample_x(&m, &mut rng)).collect();
    for (name, h) in &battery {
        let lhs: Vec<f64> = ys.iter().map(|&y| m.mean_offspring * h(y) * (-y).exp()).collect();
        let rhs: Vec<f64> = xs.iter().map(|&x| h(x)).collect();
        let (a, b) = (mean_se(&lhs), mean_se(&rhs));
        assert!(a.z_score(&b).abs() <= 4.0, "{name}: {a:?} vs {b:?}");
        let exact = d.expect(|x| h(x), 0.0).unwrap();
        assert!(b.within(exact, 4.0), "{name}: {b:?} vs quadrature {exact}");
    }
    let e: Vec<f64> = ys.iter().map(|&y| (-y).exp()).collect();
    let e = mean_se(&e);
    assert!(e.within(1.0 / m.mean_offspring, 4.0), "{e:?}");
}

#[test]
fn left_rejection_acceptance_matches_quadrature() {
    let m = p1();
    let d = m.density().unwrap();
    let mut rng = RngStream::new(14, 0);
    let n = 200_000;
    let hits: Vec<f64> = (0..n)
        .map(|_| {
            let x = sample_x_left(d, &mut rng);
            if rng.uniform() < (x - d.spec.x0).exp() {
                1.0
            } else {
                0.0
            }
        })
        .collect();
    let e = mean_se(&hits);
    assert!(e.within(m.tilt.left_acceptance, 2.0), "{e:?} vs {}", m.tilt.left_acceptance);
}

#[test]
fn shifted_poisson_counts() {
    let m = p1();
    let mut rng = RngStream::new(15, 0);
    let ks: Vec<f64> = (0..1_000_000).map(|_| sample_offspring(&m, &mut rng) as f64).collect();
    assert!(ks.iter().all(|&k| k >= 1.0));
    assert!(mean_se(&ks).within(m.mean_offspring, 4.0));

    let toy = discrete_toy_model();
    assert!((0..1000).all(|_| sample_offspring(&toy, &mut rng) == 2));
}

#[test]
fn brood_weights_average_to_one() {
    let m = p1();
    let mut rng = RngStream::new(16, 0);
    let n = 300_000;
    let mut weights = Vec::with_capacity(n);
    let mut counts = Vec::with_capacity(n);
    let mut means = Vec::with_capacity(n);
    for _ in 0..n {
        let b = sample_brood(&m, &mut rng).unwrap();
        assert_eq!(b.count, b.displacements.len());
        assert!(b.spine_index.is_none());
        weights.push(b.displacements.iter().map(|y| (-y).exp()).sum::<f64>());
        counts.push(b.count as f64);
        means.push(b.displacements[0]);
    }
    assert!(mean_se(&weights).within(1.0, 4.0));
    // count vs first displacement: correlation within 4/sqrt(n)
    let (mc, mm) = (mean_se(&counts).value, mean_se(&means).value);
    let cov: f64 = counts.iter().zip(&means).map(|(c, y)| (c - mc) * (y - mm)).sum::<f64>() / n as f64;
    let sc = (counts.iter().map(|c| (c - mc).powi(2)).sum::<f64>() / n as f64).sqrt();
    let sy = (means.iter().map(|y| (y - mm).powi(2)).sum::<f64>() / n as f64).sqrt();
    assert!((cov / (sc * sy)).abs() < 4.0 / (n as f64).sqrt());
}

#[test]
fn size_biased_count_law() {
    let m = p1();
    let mu = m.mean_offspring - 1.0;
    let mut rng = RngStream::new(17, 0);
    let kmax = 6;
    let mut obs = vec![0u64; kmax + 1];
    let mut spine_steps = Vec::new();
    for _ in 0..100_000 {
        let b = sample_size_biased_brood(&m, &mut rng).unwrap();
        let i = b.spine_index.unwrap();
        assert!(i < b.count);
        obs[b.count.min(kmax)] += 1;
        spine_steps.push(b.displacements[i]);
    }
    // P(nu_hat = k) = k P(nu = k) / E[nu], nu = 1 + Poisson(mu)
    let mut probs = vec![0.0; kmax + 1];
    let mut pois = (-mu).exp();
    for k in 1..kmax {
        probs[k] = k as f64 * pois / m.mean_offspring;
        pois *= mu / k as f64;
    }
    probs[kmax] = 1.0 - probs.iter().sum::<f64>();
    let chi = chi_square_gof(&obs[1..], &probs[1..]);
    assert!(chi.passes(LEVEL), "{chi:?}");

    let direct: Vec<f64> = (0..100_000).map(|_| sample_x(&m, &mut rng)).collect();
    let ks = ks_two_sample(&spine_steps, &direct);
    assert!(ks.passes(LEVEL), "{ks:?}");
}

#[test]
fn toy_spine_choice_follows_gibbs_weights() {
    let toy = discrete_toy_model();
    let mut rng = RngStream::new(18, 0);
    let (down, up) = (-(2f64.ln()), 3.5f64.ln());
    // cells: brood pattern (down,down), (down,up), (up,down), (up,up) x spine index
    let mut obs = [[0u64; 2]; 4];
    let n = 100_000;
    for _ in 0..n {
        let b = sample_size_biased_brood(&toy, &mut rng).unwrap();
        let code = |y: f64| if (y - down).abs() < 1e-12 { 0 } else { assert!((y - up).abs() < 1e-12); 1 };
        let cell = 2 * code(b.displacements[0]) + code(b.displacements[1]);
        obs[cell][b.spine_index.unwrap()] += 1;
    }
    // Under Q the brood has weight P(brood) (e^{-y1} + e^{-y2}) and the spine is
    // child i with probability e^{-y_i} / (e^{-y1} + e^{-y2}).
    let atoms = [(down, 0.125), (up, 0.875)];
    let mut probs = Vec::new();
    let mut flat = Vec::new();
    for (c, row) in obs.iter().enumerate() {
        let (y1, p1) = atoms[c / 2];
        let (y2, p2) = atoms[c % 2];
        for (i, &o) in row.iter().enumerate() {
            let yi = if i == 0 { y1 } else { y2 };
            probs.push(p1 * p2 * (-yi as f64).exp());
            flat.push(o);
        }
    }
    let chi = chi_square_gof(&flat, &probs);
    assert!(chi.passes(LEVEL), "{chi:?}");
}

#[test]
fn conditioned_big_jump() {
    let m = p1();
    let d = m.density().unwrap();
    let mut rng = RngStream::new(19, 0);
    for zeta in [1.0, 5.0, 40.0] {
        let mut xs = Vec::new();
        for _ in 0..50_000 {
            let (x, lp) = sample_x_conditioned_big_jump(&m, zeta, &mut rng).unwrap();
            assert!(x <= -zeta);
            assert!((lp - tail_prob(&m, zeta).unwrap().ln()).abs() < 1e-8);
            xs.push(x);
        }
        let z_lo = d.spec.lambda * zeta.powf(d.spec.b);
        let exact = d.left_integral(|x| x, z_lo).unwrap() / d.left_integral(|_| 1.0, z_lo).unwrap();
        let e = mean_se(&xs);
        assert!(e.within(exact, 4.0), "zeta {zeta}: {e:?} vs {exact}");
    }
    assert!(sample_x_conditioned_big_jump(&m, 0.5, &mut rng).is_err());

    let at_cut: Vec<f64> = (0..50_000).map(|_| sample_x_conditioned_big_jump(&m, 1.0, &mut rng).unwrap().0).collect();
    let restricted: Vec<f64> = std::iter::repeat_with(|| sample_x(&m, &mut rng)).filter(|&x| x <= -1.0).take(5_000).collect();
    let ks = ks_two_sample(&at_cut, &restricted);
    assert!(ks.passes(LEVEL), "{ks:?}");
}

#[test]
fn streams_replay_and_separate() {
    let m = p1();
    let draw = |seed, stream| {
        let mut rng = RngStream::new(seed, stream);
        (0..64).map(|_| sample_y(&m, &mut rng).unwrap()).collect::<Vec<_>>()
    };
    assert_eq!(draw(5, 9), draw(5, 9));
    assert_ne!(draw(5, 9), draw(5, 10));
    assert_ne!(draw(5, 9), draw(6, 9));
}
