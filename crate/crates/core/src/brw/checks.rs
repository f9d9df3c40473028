//! Identity checks on simulated trees: many-to-one, the spine's Gibbs law,
//! the additive martingale, stopping lines and minima.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::engine::{grow, Generation, GrowConfig, Measure, RayWindow};
use super::exact::{enumerate_toy_trees, toy_law, toy_walk_paths};
use super::tree::{simulate_spine_tree, simulate_tree, StatsRequest, TreeMode};
use crate::error::{BrwError, Result};
use crate::measure::PointMeasure;
use crate::model::{schedule, CalibratedModel, StepLaw};
use crate::par::McConfig;
use crate::report::{Report, ReportRow, Verdict};
use crate::rng::{purpose, RngStream};
use crate::rwalk::simulate_walk;
use crate::samplers::Sampler;
use crate::stats::{chi_square_parts, chi_square_sf, ks_two_sample, quantile, EstimateWithError, Welford};

/// Path functionals `f(S_1, ..., S_n)` of the many-to-one battery.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum PathFunctional {
    /// `1{min_k S_k >= -1}`.
    MinAboveMinusOne,
    /// `exp(-(S_n)^+)`.
    ExpNegPositivePart,
    /// `1{S_n <= 0}`.
    EndBelowZero,
    /// `1{some step < -zeta}`.
    BigJump { zeta: f64 },
    /// `1`.
    One,
}

impl PathFunctional {
    pub fn name(&self) -> &'static str {
        match self {
            PathFunctional::MinAboveMinusOne => "f1_min_above_minus_one",
            PathFunctional::ExpNegPositivePart => "f2_exp_neg_positive_part",
            PathFunctional::EndBelowZero => "f3_end_below_zero",
            PathFunctional::BigJump { .. } => "f4_big_jump",
            PathFunctional::One => "f5_one",
        }
    }

    /// `path` holds `S_1, ..., S_n` (`S_0 = 0` implicit).
    pub fn eval(&self, path: &[f64]) -> f64 {
        let last = path.last().copied().unwrap_or(0.0);
        let ind = |b: bool| if b { 1.0 } else { 0.0 };
        match *self {
            PathFunctional::MinAboveMinusOne => ind(path.iter().all(|&s| s >= -1.0)),
            PathFunctional::ExpNegPositivePart => (-last.max(0.0)).exp(),
            PathFunctional::EndBelowZero => ind(last <= 0.0),
            PathFunctional::BigJump { zeta } => {
                let mut prev = 0.0;
                let mut hit = false;
                for &s in path {
                    hit |= s - prev < -zeta;
                    prev = s;
                }
                ind(hit)
            }
            PathFunctional::One => 1.0,
        }
    }

    /// The fixed five-functional battery at generation `n`.
    pub fn battery(model: &CalibratedModel, n: usize) -> Result<Vec<PathFunctional>> {
        let zeta = match &model.law {
            StepLaw::Toy(_) => 0.5,
            StepLaw::Stretched(d) => schedule(model, n.max(1))?.zeta_n.max(d.spec.x0.abs()),
        };
        Ok(vec![
            PathFunctional::MinAboveMinusOne,
            PathFunctional::ExpNegPositivePart,
            PathFunctional::EndBelowZero,
            PathFunctional::BigJump { zeta },
            PathFunctional::One,
        ])
    }
}

/// Tree side `E[sum_{|u|=n} f(V(u_1..u_n)) e^{-V(u)}]` against walk side
/// `E[f(S_1..S_n)]`, by independent Monte Carlo on each side.
pub fn many_to_one_check(model: &CalibratedModel, n: usize, battery: &[PathFunctional], mc: &McConfig) -> Result<Report> {
    let tree_side = mc.run(purpose::TREE, |_, rng| -> Result<Vec<f64>> {
        let run = simulate_tree(model, n, TreeMode::FullGenealogy, &StatsRequest::default(), rng, mc.pop_cap)?;
        let gen = run.tree.generation(n).unwrap_or(&[]);
        let mut acc = vec![0.0; battery.len()];
        for (i, &v) in gen.iter().enumerate() {
            let path = run.tree.path(n, i);
            let w = (-v).exp();
            for (a, f) in acc.iter_mut().zip(battery) {
                *a += f.eval(&path) * w;
            }
        }
        Ok(acc)
    });
    let walk_side = mc.run(purpose::WALK, |_, rng| {
        let path = simulate_walk(model, n, rng);
        battery.iter().map(|f| f.eval(&path.sums[1..])).collect::<Vec<f64>>()
    });
    let mut tw = vec![Welford::default(); battery.len()];
    let mut ww = vec![Welford::default(); battery.len()];
    for r in tree_side {
        for (w, v) in tw.iter_mut().zip(r?) {
            w.push(v);
        }
    }
    for r in walk_side {
        for (w, v) in ww.iter_mut().zip(r) {
            w.push(v);
        }
    }
    let mut report = Report::new("many-to-one");
    for ((f, t), w) in battery.iter().zip(tw).zip(ww) {
        let (t, w) = (t.estimate(), w.estimate());
        let ok = t.z_score(&w) <= 4.0;
        report.push(
            ReportRow::new(f.name(), n, t.value, t.se.hypot(w.se), w.value, Verdict::from_bool(ok)).with_ratio(t.value / w.value),
        );
    }
    Ok(report)
}

/// Both sides of many-to-one by exhaustive enumeration (toy model, `n <= 3`).
pub fn many_to_one_exact(model: &CalibratedModel, n: usize, battery: &[PathFunctional]) -> Result<Vec<(PathFunctional, f64, f64)>> {
    let law = toy_law(model)?;
    let trees = enumerate_toy_trees(&law, n)?;
    let walks = toy_walk_paths(&law, n);
    Ok(battery
        .iter()
        .map(|f| {
            let tree: f64 = trees
                .iter()
                .map(|t| {
                    let s: f64 = t.generations[n]
                        .iter()
                        .enumerate()
                        .map(|(i, &v)| f.eval(&t.path(n, i)) * (-v).exp())
                        .sum();
                    t.prob * s
                })
                .sum();
            let walk: f64 = walks.iter().map(|(p, q)| q * f.eval(p)).sum();
            (*f, tree, walk)
        })
        .collect())
}

/// Report form of [`many_to_one_exact`] with absolute tolerance `tol`.
pub fn many_to_one_exact_report(model: &CalibratedModel, n: usize, tol: f64) -> Result<Report> {
    let battery = PathFunctional::battery(model, n)?;
    let mut report = Report::new("many-to-one-exact");
    for (f, t, w) in many_to_one_exact(model, n, &battery)? {
        let gap = (t - w).abs();
        let verdict = if gap <= tol { Verdict::ExactPass } else { Verdict::Fail };
        report.push(ReportRow::new(f.name(), n, t, 0.0, w, verdict).with_ratio(gap));
    }
    Ok(report)
}

/// Minimum cell size for the Gibbs test.
pub const GIBBS_MIN_CELL: u64 = 50;

/// Spine-identity frequencies given the tree against `e^{-V(u)} / W_n`.
///
/// For the toy model each exact tree is a cell and per-cell Pearson
/// statistics are summed. For a continuous law at `n = 1`, positions are
/// binned by quantiles and the spine's bin indicator is paired with the
/// bin's weight `sum_{u in bin} e^{-V(u)} / W_1`.
pub fn gibbs_check(model: &CalibratedModel, n: usize, bins: usize, mc: &McConfig) -> Result<Report> {
    match &model.law {
        StepLaw::Toy(_) => gibbs_exact_cells(model, n, mc),
        StepLaw::Stretched(_) => {
            if n != 1 {
                return Err(BrwError::domain("binned Gibbs check is implemented for n = 1"));
            }
            gibbs_binned(model, bins, mc)
        }
    }
}

fn gibbs_exact_cells(model: &CalibratedModel, n: usize, mc: &McConfig) -> Result<Report> {
    if n > 4 {
        return Err(BrwError::domain("Gibbs cells are only estimable for n <= 4"));
    }
    let runs = mc.run(purpose::SPINE_TREE, |_, rng| -> Result<(Vec<u64>, Vec<f64>, usize)> {
        let run = simulate_spine_tree(model, n, rng, mc.pop_cap)?;
        let key: Vec<u64> = run.tree.generations.iter().flatten().map(|v| v.to_bits()).collect();
        let leaves = run.tree.generations[n].clone();
        Ok((key, leaves, run.spine_nodes[n]))
    });
    let mut cells: BTreeMap<Vec<u64>, (Vec<f64>, Vec<u64>)> = BTreeMap::new();
    for r in runs {
        let (key, leaves, spine) = r?;
        let entry = cells.entry(key).or_insert_with(|| (leaves.clone(), vec![0; leaves.len()]));
        entry.1[spine] += 1;
    }
    let mut report = Report::new("gibbs");
    let (mut stat, mut df, mut used, mut skipped) = (0.0, 0usize, 0usize, 0usize);
    for (leaves, counts) in cells.values() {
        let total: u64 = counts.iter().sum();
        if total < GIBBS_MIN_CELL {
            skipped += 1;
            continue;
        }
        let w: f64 = leaves.iter().map(|&v| (-v).exp()).sum();
        let probs: Vec<f64> = leaves.iter().map(|&v| (-v).exp() / w).collect();
        let (s, d) = chi_square_parts(counts, &probs);
        stat += s;
        df += d;
        used += 1;
    }
    if skipped > 0 {
        report.note(format!("{skipped} cells below {GIBBS_MIN_CELL} runs skipped"));
    }
    let p = chi_square_sf(stat, df);
    // estimate: p-value against the 1e-3 level; ratio: the statistic
    report.push(ReportRow::new("gibbs_chi_square", n, p, 0.0, 1e-3, Verdict::from_bool(used > 0 && p >= 1e-3)).with_ratio(stat));
    report.note(format!("{used} cells, {df} degrees of freedom, p = {p:.4e}"));
    Ok(report)
}

fn gibbs_binned(model: &CalibratedModel, bins: usize, mc: &McConfig) -> Result<Report> {
    let bins = bins.max(2);
    let runs = mc.run(purpose::SPINE_TREE, |_, rng| -> Result<(Vec<f64>, usize)> {
        let run = simulate_spine_tree(model, 1, rng, mc.pop_cap)?;
        Ok((run.tree.generations[1].clone(), run.spine_nodes[1]))
    });
    let runs: Vec<(Vec<f64>, usize)> = runs.into_iter().collect::<Result<_>>()?;
    let mut spine_pos: Vec<f64> = runs.iter().map(|(g, s)| g[*s]).collect();
    spine_pos.sort_by(f64::total_cmp);
    let edges: Vec<f64> = (1..bins).map(|k| quantile(&spine_pos, k as f64 / bins as f64)).collect();
    let bin_of = |v: f64| edges.partition_point(|&e| e < v);
    let mut acc = vec![Welford::default(); bins];
    let mut diff = vec![0.0; bins];
    for (gen, s) in &runs {
        let w: f64 = gen.iter().map(|&v| (-v).exp()).sum();
        diff.iter_mut().for_each(|d| *d = 0.0);
        diff[bin_of(gen[*s])] += 1.0;
        for &v in gen {
            diff[bin_of(v)] -= (-v).exp() / w;
        }
        for (a, &d) in acc.iter_mut().zip(&diff) {
            a.push(d);
        }
    }
    let mut report = Report::new("gibbs-binned");
    for (k, a) in acc.iter().enumerate() {
        let e = a.estimate();
        report.push(ReportRow::new(format!("gibbs_bin_{k}"), 1, e.value, e.se, 0.0, Verdict::from_bool(e.within(0.0, 4.0))));
    }
    Ok(report)
}

/// `E[W_n]` against 1 and paired `E[W_{n+1} - W_n]` against 0 on each grid point.
pub fn martingale_check(model: &CalibratedModel, n_grid: &[usize], mc: &McConfig) -> Result<Report> {
    let top = n_grid.iter().copied().max().unwrap_or(0) + 1;
    let runs = mc.run(purpose::TREE, |_, rng| -> Result<Vec<f64>> {
        let mut ws = Vec::with_capacity(top + 1);
        grow(model, GrowConfig::new(top, Measure::P).pop_cap(mc.pop_cap), rng, &mut |g: &Generation| {
            ws.push(g.w());
            Ok(())
        })?;
        Ok(ws)
    });
    let (ok_runs, lost) = split_capacity(runs)?;
    let mut report = Report::new("martingale");
    if lost > 0 {
        report.note(format!("{lost} replicates lost to the population cap"));
    }
    for &n in n_grid {
        let w: Vec<f64> = ok_runs.iter().map(|r| r[n]).collect();
        let d: Vec<f64> = ok_runs.iter().map(|r| r[n + 1] - r[n]).collect();
        let e = EstimateWithError::from_samples(&w);
        let de = EstimateWithError::from_samples(&d);
        report.push(ReportRow::new("mean_W", n, e.value, e.se, 1.0, Verdict::from_bool(e.within(1.0, 4.0))));
        report.push(ReportRow::new("mean_W_increment", n, de.value, de.se, 0.0, Verdict::from_bool(de.within(0.0, 4.0))));
    }
    Ok(report)
}

/// Splits replicate results into successes and a count of capacity losses;
/// any other error is returned.
pub fn split_capacity<T>(runs: Vec<Result<T>>) -> Result<(Vec<T>, usize)> {
    let mut ok = Vec::with_capacity(runs.len());
    let mut lost = 0;
    for r in runs {
        match r {
            Ok(v) => ok.push(v),
            Err(e) if e.is_capacity() => lost += 1,
            Err(e) => return Err(e),
        }
    }
    Ok((ok, lost))
}

/// `s_n = min_{|u|=n} max_{k in [ceil(eps n), n]} V(u_k) / k^{1/(2-b)}`; `+inf` on extinction.
pub fn ray_statistic(model: &CalibratedModel, n: usize, eps: f64, rng: &mut RngStream, pop_cap: usize) -> Result<f64> {
    if n < 10 {
        return Err(BrwError::domain("the ray statistic needs n >= 10"));
    }
    let windows = [RayWindow { n, eps }];
    let mut out = f64::INFINITY;
    grow(model, GrowConfig::new(n, Measure::P).pop_cap(pop_cap).windows(&windows), rng, &mut |g: &Generation| {
        if g.n == n {
            out = g.ray_stat(0);
        }
        Ok(())
    })?;
    Ok(out)
}

/// `(M_n - alpha_n, W_n)` on one tree.
pub fn minimum_sample(model: &CalibratedModel, n: usize, rng: &mut RngStream, pop_cap: usize) -> Result<(f64, f64)> {
    let alpha = schedule(model, n)?.alpha_n;
    let mut out = (f64::INFINITY, 0.0);
    grow(model, GrowConfig::new(n, Measure::P).pop_cap(pop_cap), rng, &mut |g: &Generation| {
        if g.n == n {
            out = (g.min() - alpha, g.w());
        }
        Ok(())
    })?;
    Ok(out)
}

/// Centered minima paired with `W_n` over replicates; capacity losses are counted.
pub fn minimum_samples(model: &CalibratedModel, n: usize, mc: &McConfig) -> Result<(Vec<(f64, f64)>, usize)> {
    split_capacity(mc.run(purpose::TREE, |_, rng| minimum_sample(model, n, rng, mc.pop_cap)))
}

/// Tightness of the lower tail: `P(M_n <= alpha_n - x)` against `slack e^{-x}`.
pub fn minimum_tail_report(samples: &[(f64, f64)], n: usize, x_grid: &[f64], slack: f64) -> Report {
    let mut report = Report::new("minimum-tail");
    let k = samples.len() as f64;
    for &x in x_grid {
        let hits = samples.iter().filter(|(c, _)| *c <= -x).count() as f64;
        let p = hits / k;
        let bound = slack * (-x).exp();
        report.push(
            ReportRow::new(format!("lower_tail_x{x}"), n, p, (p * (1.0 - p) / k).sqrt(), bound, Verdict::from_bool(p <= bound))
                .with_ratio(p / (-x).exp()),
        );
    }
    report
}

/// First-passage line `Z(K) = {u : V(u) >= K, V(u_k) < K for k < |u|}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoppingLine {
    pub level: f64,
    pub atoms: PointMeasure,
    /// `sum_{u in Z(K)} e^{-V(u)}`.
    pub w: f64,
    /// Deepest generation reached.
    pub depth: usize,
}

/// Grow only the particles still below `level` until none remain.
pub fn stopping_line(model: &CalibratedModel, level: f64, rng: &mut RngStream, depth_cap: usize, pop_cap: usize) -> Result<StoppingLine> {
    if !(level > 0.0) {
        return Err(BrwError::domain("stopping level must be positive"));
    }
    let sampler = Sampler::new(model);
    let mut frontier = vec![0.0f64];
    let mut line = Vec::new();
    let mut brood = Vec::new();
    let mut depth = 0;
    let mut total = 1usize;
    while !frontier.is_empty() {
        if depth == depth_cap {
            let unfinished: f64 = frontier.iter().map(|&v| (-v).exp()).sum();
            return Err(BrwError::UnfinishedLine { depth, mass: unfinished });
        }
        depth += 1;
        let mut next = Vec::new();
        for &x in &frontier {
            brood.clear();
            sampler.fill_brood(rng, false, &mut brood)?;
            for &y in &brood {
                let v = x + y;
                if v >= level {
                    line.push(v);
                } else {
                    next.push(v);
                }
            }
        }
        total += next.len();
        if total > pop_cap {
            return Err(BrwError::Capacity { generation: depth, population: total, cap: pop_cap });
        }
        frontier = next;
    }
    let w = line.iter().map(|&v| (-v).exp()).sum();
    Ok(StoppingLine { level, atoms: PointMeasure::new(line), w, depth })
}

/// Stopping-line sums for several levels and `W_n` on one tree grown to `n`.
/// Entries whose line is not complete by generation `n` are `None`.
pub fn stopping_lines_with_w(model: &CalibratedModel, levels: &[f64], n: usize, rng: &mut RngStream, pop_cap: usize) -> Result<(Vec<Option<f64>>, f64)> {
    let k = levels.len();
    // per particle and level: has the lineage already crossed
    let mut crossed: Vec<bool> = vec![false; k];
    let mut sums = vec![0.0; k];
    let mut complete = vec![true; k];
    let mut w_n = 0.0;
    grow(model, GrowConfig::new(n, Measure::P).pop_cap(pop_cap), rng, &mut |g: &Generation| {
        if g.n == 0 {
            return Ok(());
        }
        let mut next = Vec::with_capacity(g.pop() * k);
        for (i, &v) in g.positions.iter().enumerate() {
            let p = g.parents[i] as usize;
            for j in 0..k {
                let before = g.n > 1 && crossed[p * k + j];
                if !before && v >= levels[j] {
                    sums[j] += (-v).exp();
                }
                next.push(before || v >= levels[j]);
            }
        }
        crossed = next;
        if g.n == n {
            w_n = g.w();
            for j in 0..k {
                complete[j] = (0..g.pop()).all(|i| crossed[i * k + j]);
            }
        }
        Ok(())
    })?;
    Ok((sums.into_iter().zip(complete).map(|(s, c)| c.then_some(s)).collect(), w_n))
}

/// Change of measure on a spine tree: `E_Q[1{M_n <= 0} / W_n]` against
/// `E_P[1{M_n <= 0}]` at `n_cm`, and the spine path at `n_ks` against the
/// walk (two-sample KS on `S_n` and on `min_k S_k`, level `ks_level`).
pub fn spine_check(model: &CalibratedModel, n_cm: usize, n_ks: usize, ks_level: f64, mc: &McConfig) -> Result<Report> {
    if n_ks == 0 {
        return Err(BrwError::domain("the spine path comparison needs n >= 1"));
    }
    let q_side = mc.run(purpose::SPINE_TREE, |_, rng| -> Result<f64> {
        let run = simulate_spine_tree(model, n_cm, rng, mc.pop_cap)?;
        let s = &run.summaries[n_cm];
        Ok(if s.min_position <= 0.0 { 1.0 / s.w } else { 0.0 })
    });
    let p_side = mc.run(purpose::TREE, |_, rng| -> Result<f64> {
        let (m, _) = minimum_sample_raw(model, n_cm, rng, mc.pop_cap)?;
        Ok(if m <= 0.0 { 1.0 } else { 0.0 })
    });
    let (q, lost_q) = split_capacity(q_side)?;
    let (p, lost_p) = split_capacity(p_side)?;
    let mut report = Report::new("spine-check");
    if lost_q + lost_p > 0 {
        report.note(format!("{} replicates lost to the population cap", lost_q + lost_p));
    }
    let (q, p) = (EstimateWithError::from_samples(&q), EstimateWithError::from_samples(&p));
    report.push(
        ReportRow::new("change_of_measure_min_below_zero", n_cm, q.value, q.se.hypot(p.se), p.value, Verdict::from_bool(q.z_score(&p) <= 4.0))
            .with_ratio(q.value / p.value),
    );

    let spine = mc.run(purpose::SPINE_TREE ^ 0x100, |_, rng| -> Result<(f64, f64)> {
        let run = simulate_spine_tree(model, n_ks, rng, mc.pop_cap)?;
        let path = &run.spine_positions[1..];
        Ok((path[n_ks - 1], path.iter().copied().fold(f64::INFINITY, f64::min)))
    });
    let (spine, _) = split_capacity(spine)?;
    let walks = mc.run(purpose::WALK, |_, rng| {
        let path = simulate_walk(model, n_ks, rng);
        let tail = &path.sums[1..];
        (tail[n_ks - 1], tail.iter().copied().fold(f64::INFINITY, f64::min))
    });
    for (name, pick) in [("spine_ks_end", 0usize), ("spine_ks_running_min", 1)] {
        let get = |v: &(f64, f64)| if pick == 0 { v.0 } else { v.1 };
        let a: Vec<f64> = spine.iter().map(get).collect();
        let b: Vec<f64> = walks.iter().map(get).collect();
        let t = ks_two_sample(&a, &b);
        report.push(ReportRow::new(name, n_ks, t.statistic, 0.0, ks_level, Verdict::from_bool(t.passes(ks_level))).with_ratio(t.p_value));
    }
    Ok(report)
}

fn minimum_sample_raw(model: &CalibratedModel, n: usize, rng: &mut RngStream, pop_cap: usize) -> Result<(f64, f64)> {
    let mut out = (f64::INFINITY, 0.0);
    grow(model, GrowConfig::new(n, Measure::P).pop_cap(pop_cap), rng, &mut |g: &Generation| {
        if g.n == n {
            out = (g.min(), g.w());
        }
        Ok(())
    })?;
    Ok(out)
}
