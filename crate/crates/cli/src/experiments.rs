//! One function per experiment kind; each returns its tables and report.

use brwlab::brw::{
    gibbs_check, many_to_one_check, many_to_one_exact_report, minimum_tail_report, simulate_tree, spine_check, split_capacity,
    PathFunctional, StatsRequest, TreeMode,
};
use brwlab::limits::{
    compare_extremal, compare_minimum_law, e_minus_m_profile, estimate_e_minus_m, estimate_limit_constants, extremal_batch,
    joint_min_functional, laplace_functional_report, limit_process_truncation, sample_limit_process_batch, w_pool, ExtremalRow,
    LimitLawEstimate, Scheme, TestFunction,
};
use brwlab::model::{schedule, CalibratedModel, StepLaw};
use brwlab::par::McConfig;
use brwlab::report::{fmt_f64, Report, ReportRow, Table, Verdict};
use brwlab::rng::purpose;
use brwlab::rwalk::{verify_local_interval, verify_mgf_bound, verify_no_jump_bound, verify_one_jump_limit, verify_two_jump_bound, JumpFunctional, CONSTANT_SLACK};
use brwlab::stats::{median, quantile, EstimateWithError};
use brwlab::brw::RayWindow;

use crate::config::{Experiment, LimitInputs, RunConfig};
use crate::error::CliError;

/// Everything a run writes besides the manifest.
pub struct Outputs {
    /// `(file name, CSV text)` for `tables/`.
    pub tables: Vec<(String, String)>,
    pub report: Report,
    /// Replicates attempted and lost to the population cap, over all batches.
    pub requested: usize,
    pub lost: usize,
}

impl Outputs {
    fn new(report: Report) -> Self {
        Outputs { tables: Vec::new(), report, requested: 0, lost: 0 }
    }

    fn batch(&mut self, requested: usize, lost: usize) {
        self.requested += requested;
        self.lost += lost;
    }

    fn table(&mut self, name: &str, t: Table) {
        self.tables.push((name.to_string(), t.to_csv()));
    }
}

pub fn execute(cfg: &RunConfig, model: &CalibratedModel, mc: &McConfig) -> Result<Outputs, CliError> {
    if matches!(model.law, StepLaw::Toy(_)) && !cfg.experiment.allows_toy() {
        return Err(CliError::Config(format!("{} needs a stretched-exponential model", cfg.experiment.kind())));
    }
    let mut out = match &cfg.experiment {
        Experiment::Simulate { n, atoms_at, ray_windows } => simulate(model, *n, atoms_at, ray_windows, mc)?,
        Experiment::MinimumLaw { n_grid, x_grid, tail_x, tail_slack, .. } => {
            minimum_law(model, n_grid, x_grid, tail_x, *tail_slack, &cfg.limit_inputs().unwrap(), mc)?
        }
        Experiment::Extremal { n_grid, battery, .. } => extremal(model, n_grid, battery, &cfg.limit_inputs().unwrap(), mc)?,
        Experiment::Joint { n, x_grid, battery, .. } => joint(model, *n, x_grid, battery, &cfg.limit_inputs().unwrap(), mc)?,
        Experiment::SpineCheck { n_cm, n_ks, ks_level } => {
            let mut o = Outputs::new(spine_check(model, *n_cm, *n_ks, *ks_level, mc)?);
            o.batch(3 * mc.reps, 0);
            o
        }
        Experiment::ManyToOne { n, gibbs_n, bins } => many_to_one(model, *n, gibbs_n, *bins, mc)?,
        Experiment::RwLemmas { n, mgf_n_grid, x_grid, y_grid, two_jump_threshold, one_jump } => {
            rw_lemmas(model, *n, mgf_n_grid, x_grid, y_grid, *two_jump_threshold, one_jump.as_ref(), mc)?
        }
        Experiment::Cstar { j_max, compare_j, battery } => cstar(model, *j_max, compare_j, battery, mc)?,
        Experiment::LimitProcess { window, battery, .. } => {
            limit_process(model, (window[0], window[1]), battery, &cfg.limit_inputs().unwrap(), mc)?
        }
        Experiment::RayExponent { n_grid, eps } => ray_exponent(model, n_grid, *eps, mc)?,
    };
    out.tables.push(("report.csv".to_string(), out.report.to_csv()));
    Ok(out)
}

fn info(quantity: impl Into<String>, n: usize, e: EstimateWithError) -> ReportRow {
    ReportRow::new(quantity, n, e.value, e.se, f64::NAN, Verdict::Info)
}

fn simulate(model: &CalibratedModel, n: usize, atoms_at: &[usize], windows: &[RayWindow], mc: &McConfig) -> Result<Outputs, CliError> {
    let req = StatsRequest { extremal: !atoms_at.is_empty(), ray_windows: windows.to_vec() };
    let runs = mc.run(purpose::TREE, |_, rng| simulate_tree(model, n, TreeMode::FrontierOnly, &req, rng, mc.pop_cap).map(|r| r.summaries));
    let (runs, lost) = split_capacity(runs)?;
    let mut gens = Table::new(&["rep", "n", "pop", "M_n", "W_n", "ray_stat"]);
    let mut atoms = Table::new(&["rep", "n", "atom"]);
    let mut report = Report::new("simulate");
    for (rep, summaries) in runs.iter().enumerate() {
        for s in summaries {
            if s.pop > 0 && s.w < (-s.min_position).exp() {
                return Err(CliError::Invariant(format!("replicate {rep}: W_{} = {} below e^(-M_n)", s.n, s.w)));
            }
            gens.row(vec![
                rep.to_string(),
                s.n.to_string(),
                s.pop.to_string(),
                fmt_f64(s.min_position),
                fmt_f64(s.w),
                s.ray_stat.map(fmt_f64).unwrap_or_default(),
            ]);
            if let (true, Some(m)) = (atoms_at.contains(&s.n), &s.extremal) {
                for &a in m.atoms() {
                    atoms.row(vec![rep.to_string(), s.n.to_string(), fmt_f64(a)]);
                }
            }
        }
    }
    if !runs.is_empty() {
        let w: Vec<f64> = runs.iter().map(|r| r[n].w).collect();
        let e = EstimateWithError::from_samples(&w);
        report.push(ReportRow::new("mean_W", n, e.value, e.se, 1.0, Verdict::from_bool(e.within(1.0, 4.0))));
        let extinct = runs.iter().filter(|r| r[n].pop == 0).count() as f64 / runs.len() as f64;
        report.push(ReportRow::new("extinct_fraction", n, extinct, 0.0, f64::NAN, Verdict::Info));
    }
    let mut out = Outputs::new(report);
    out.batch(mc.reps, lost);
    out.table("generations.csv", gens);
    if !atoms_at.is_empty() {
        out.table("atoms.csv", atoms);
    }
    Ok(out)
}

/// Limit constants and the W pool for a battery.
fn limit_inputs(
    model: &CalibratedModel,
    battery: &[TestFunction],
    li: &LimitInputs,
    mc: &McConfig,
    out: &mut Outputs,
) -> Result<(LimitLawEstimate, Vec<f64>), CliError> {
    let consts = estimate_limit_constants(model, li.j_max, battery, &mc.reps(li.cstar_reps))?;
    out.batch(li.cstar_reps, consts.lost);
    let pool_reps = li.w_pool_reps.unwrap_or(mc.reps);
    let (pool, lost) = w_pool(model, li.w_pool_n, &mc.reps(pool_reps))?;
    out.batch(pool_reps, lost);
    if pool.is_empty() {
        return Err(CliError::Capacity("every W pool tree hit the population cap".into()));
    }
    Ok((consts, pool))
}

fn constants_rows(report: &mut Report, c: &LimitLawEstimate) {
    report.push(info("cstar_truncated", c.j_trunc, c.cstar));
    report.push(info("cstar0", c.j_trunc, c.cstar0));
    report.push(ReportRow::new("cstar_fitted_tail", c.j_trunc, c.fitted_tail.unwrap_or(f64::NAN), 0.0, f64::NAN, Verdict::Info));
    report.push(ReportRow::new(
        "cstar_series_converged",
        c.j_trunc,
        if c.converged { 1.0 } else { 0.0 },
        0.0,
        f64::NAN,
        Verdict::Info,
    ));
    report.push(ReportRow::new("cstar_quad_doubling_gap", c.j_trunc, c.quad_doubling_gap, 0.0, 1e-6, Verdict::from_bool(c.quad_doubling_gap <= 1e-6)));
    for f in &c.functions {
        report.push(info(format!("cstar_f_{}", f.f.label()), c.j_trunc, f.cstar_f));
        report.push(info(format!("cstar_delta_{}", f.f.label()), c.j_trunc, f.delta));
    }
}

fn profile_table(c: &LimitLawEstimate) -> Table {
    let mut t = Table::new(&["j", "estimate", "se"]);
    for (j, e) in c.profile.iter().enumerate() {
        t.row(vec![j.to_string(), fmt_f64(e.value), fmt_f64(e.se)]);
    }
    t
}

fn minima_table(batch: &[Vec<ExtremalRow>]) -> Table {
    let mut t = Table::new(&["rep", "n", "centered_min", "W_n"]);
    for (rep, rows) in batch.iter().enumerate() {
        for r in rows {
            t.row(vec![rep.to_string(), r.n.to_string(), fmt_f64(r.centered_min), fmt_f64(r.w)]);
        }
    }
    t
}

fn minimum_law(
    model: &CalibratedModel,
    n_grid: &[usize],
    x_grid: &[f64],
    tail_x: &[f64],
    tail_slack: f64,
    li: &LimitInputs,
    mc: &McConfig,
) -> Result<Outputs, CliError> {
    let mut out = Outputs::new(Report::new("minimum-law"));
    let (consts, pool) = limit_inputs(model, &[], li, mc, &mut out)?;
    let (batch, lost) = extremal_batch(model, n_grid, &[], mc)?;
    out.batch(mc.reps, lost);
    if batch.is_empty() {
        return Err(CliError::Capacity("every tree hit the population cap".into()));
    }
    let (law, tables) = compare_minimum_law(&batch, n_grid, consts.cstar0.value, &pool, x_grid);
    let mut report = law;
    let mut iqrs = Vec::new();
    for (k, &n) in n_grid.iter().enumerate() {
        let pairs: Vec<(f64, f64)> = batch.iter().map(|r| (r[k].centered_min, r[k].w)).collect();
        report.extend(minimum_tail_report(&pairs, n, tail_x, tail_slack));
        let mut c: Vec<f64> = pairs.iter().map(|p| p.0).collect();
        c.sort_by(f64::total_cmp);
        let iqr = quantile(&c, 0.75) - quantile(&c, 0.25);
        iqrs.push(iqr);
        report.push(ReportRow::new("iqr_centered_min", n, iqr, 0.0, f64::NAN, Verdict::Info));
    }
    let (lo, hi) = iqrs.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &v| (a.min(v), b.max(v)));
    let variation = hi / lo - 1.0;
    report.push(ReportRow::new("iqr_variation", *n_grid.last().unwrap(), variation, 0.0, 0.5, Verdict::from_bool(variation < 0.5)));
    constants_rows(&mut report, &consts);
    out.report = report;
    for (n, rows) in tables {
        let mut t = Table::new(&["x", "empirical", "limit", "gap", "se"]);
        for r in rows {
            t.row(vec![fmt_f64(r.x), fmt_f64(r.empirical), fmt_f64(r.limit), fmt_f64(r.gap), fmt_f64(r.se)]);
        }
        out.table(&format!("minimum_law_n{n}.csv"), t);
    }
    out.table("minima.csv", minima_table(&batch));
    out.table("cstar_profile.csv", profile_table(&consts));
    Ok(out)
}

fn extremal(model: &CalibratedModel, n_grid: &[usize], battery: &[TestFunction], li: &LimitInputs, mc: &McConfig) -> Result<Outputs, CliError> {
    let mut out = Outputs::new(Report::new("extremal"));
    let (consts, pool) = limit_inputs(model, battery, li, mc, &mut out)?;
    let (batch, lost) = extremal_batch(model, n_grid, battery, mc)?;
    out.batch(mc.reps, lost);
    if batch.is_empty() {
        return Err(CliError::Capacity("every tree hit the population cap".into()));
    }
    let mut report = compare_extremal(&batch, n_grid, &consts, &pool);
    constants_rows(&mut report, &consts);
    out.report = report;
    let mut t = Table::new(&["rep", "n", "function", "sum"]);
    for (rep, rows) in batch.iter().enumerate() {
        for r in rows {
            for (f, v) in battery.iter().zip(&r.functionals) {
                t.row(vec![rep.to_string(), r.n.to_string(), f.label(), fmt_f64(*v)]);
            }
        }
    }
    out.table("functionals.csv", t);
    out.table("minima.csv", minima_table(&batch));
    out.table("cstar_profile.csv", profile_table(&consts));
    Ok(out)
}

fn joint(model: &CalibratedModel, n: usize, x_grid: &[f64], battery: &[TestFunction], li: &LimitInputs, mc: &McConfig) -> Result<Outputs, CliError> {
    let mut out = Outputs::new(Report::new("joint"));
    // C*(f_x) for every (f, x), in battery-major order
    let shifted: Vec<TestFunction> = battery.iter().flat_map(|f| x_grid.iter().map(move |&x| f.shifted(x))).collect();
    let (consts, pool) = limit_inputs(model, &shifted, li, mc, &mut out)?;
    let (batch, lost) = extremal_batch(model, &[n], battery, mc)?;
    out.batch(mc.reps, lost);
    if batch.is_empty() {
        return Err(CliError::Capacity("every tree hit the population cap".into()));
    }
    let mut report = Report::new("joint");
    let mut t = Table::new(&["function", "x", "empirical", "limit", "gap", "se"]);
    for (fi, f) in battery.iter().enumerate() {
        for (xi, &x) in x_grid.iter().enumerate() {
            let (emp, lim) = joint_min_functional(&batch, 0, fi, x, &consts.functions[fi * x_grid.len() + xi], &pool);
            let se = emp.se.hypot(lim.se);
            let gap = (emp.value - lim.value).abs();
            report.push(ReportRow::new(format!("joint_{}_x{x}", f.label()), n, emp.value, se, lim.value, Verdict::Info).with_ratio(gap));
            t.row(vec![f.label(), fmt_f64(x), fmt_f64(emp.value), fmt_f64(lim.value), fmt_f64(gap), fmt_f64(se)]);
        }
    }
    constants_rows(&mut report, &consts);
    out.report = report;
    out.table("joint.csv", t);
    out.table("cstar_profile.csv", profile_table(&consts));
    Ok(out)
}

fn many_to_one(model: &CalibratedModel, n: usize, gibbs_n: &[usize], bins: usize, mc: &McConfig) -> Result<Outputs, CliError> {
    let toy = matches!(model.law, StepLaw::Toy(_));
    let mut report = if toy && n <= 3 {
        many_to_one_exact_report(model, n, 1e-12)?
    } else {
        many_to_one_check(model, n, &PathFunctional::battery(model, n)?, mc)?
    };
    for &g in gibbs_n {
        if toy || g == 1 {
            report.extend(gibbs_check(model, g, bins, mc)?);
        } else {
            report.note(format!("Gibbs check at n = {g} skipped: the binned form is only defined at n = 1"));
        }
    }
    let mut out = Outputs::new(report);
    out.batch(mc.reps * (1 + gibbs_n.len()), 0);
    Ok(out)
}

/// Run a lemma verifier, turning a precondition failure into a note.
fn lemma(report: &mut Report, what: &str, r: brwlab::Result<Report>) -> Result<(), CliError> {
    match r {
        Ok(r) => {
            report.extend(r);
            Ok(())
        }
        Err(brwlab::BrwError::Domain(m)) => {
            report.note(format!("{what} skipped: {m}"));
            Ok(())
        }
        Err(e) => Err(e.into()),
    }
}

#[allow(clippy::too_many_arguments)]
fn rw_lemmas(
    model: &CalibratedModel,
    n: usize,
    mgf_n_grid: &[usize],
    x_grid: &[f64],
    y_grid: &[f64],
    two_jump_threshold: Option<f64>,
    one_jump: Option<&crate::config::OneJumpParams>,
    mc: &McConfig,
) -> Result<Outputs, CliError> {
    let d = model.require_density("rw-lemmas")?;
    let mut report = Report::new("rw-lemmas");
    lemma(&mut report, "moment bound", verify_mgf_bound(model, mgf_n_grid))?;
    lemma(&mut report, "no-jump bound", verify_no_jump_bound(model, n, n, x_grid, mc))?;
    let zeta = match two_jump_threshold {
        Some(z) => z,
        None => schedule(model, n)?.zeta_n.max(d.spec.x0.abs()),
    };
    lemma(&mut report, "two-jump bound", verify_two_jump_bound(model, n, Some(zeta), mc))?;
    if !y_grid.is_empty() {
        lemma(&mut report, "local interval bound", verify_local_interval(model, n, y_grid, CONSTANT_SLACK, mc))?;
    }
    if let Some(oj) = one_jump {
        lemma(
            &mut report,
            "one-jump limit",
            verify_one_jump_limit(model, oj.n, oj.p.unwrap_or(oj.n), oj.y, &JumpFunctional::default_battery(), mc),
        )?;
    }
    let mut out = Outputs::new(report);
    out.batch(mc.reps, 0);
    Ok(out)
}

fn cstar(model: &CalibratedModel, j_max: usize, compare_j: &[usize], battery: &[TestFunction], mc: &McConfig) -> Result<Outputs, CliError> {
    let mut out = Outputs::new(Report::new("cstar"));
    let consts = estimate_limit_constants(model, j_max, battery, mc)?;
    out.batch(mc.reps, consts.lost);
    let mut report = Report::new("cstar");
    constants_rows(&mut report, &consts);
    let zero = consts.cstar0;
    for f in &consts.functions {
        let ok = f.cstar_f.value >= zero.value;
        report.push(ReportRow::new(format!("cstar_f_above_cstar0_{}", f.f.label()), consts.j_trunc, f.cstar_f.value, f.cstar_f.se, zero.value, Verdict::from_bool(ok)));
    }
    if let Some(&top) = compare_j.iter().max() {
        let (direct, lost) = e_minus_m_profile(model, top, Scheme::Direct, mc)?;
        out.batch(mc.reps, lost);
        for &j in compare_j {
            let q = estimate_e_minus_m(model, j, Scheme::SpineIs, mc)?;
            let d = direct[j];
            report.push(
                ReportRow::new("e_minus_m_direct_vs_spine", j, d.value, d.se.hypot(q.se), q.value, Verdict::from_bool(d.z_score(&q) <= 4.0))
                    .with_ratio(d.value / q.value),
            );
        }
    }
    out.report = report;
    out.table("cstar_profile.csv", profile_table(&consts));
    Ok(out)
}

fn limit_process(model: &CalibratedModel, window: (f64, f64), battery: &[TestFunction], li: &LimitInputs, mc: &McConfig) -> Result<Outputs, CliError> {
    let mut out = Outputs::new(Report::new("limit-process"));
    let (consts, pool) = limit_inputs(model, battery, li, mc, &mut out)?;
    let draws = sample_limit_process_batch(model, &pool, window, consts.j_trunc, mc)?;
    out.batch(mc.reps, 0);
    let mut report = laplace_functional_report(&draws, &consts, &pool);
    let neglected = limit_process_truncation(model, window.1, consts.fitted_tail.unwrap_or(f64::INFINITY))?;
    report.push(ReportRow::new("neglected_decorations", consts.j_trunc, neglected, 0.0, f64::NAN, Verdict::Info));
    report.note("the closed form uses the same series cut, so the identity is exact for the truncated process");
    constants_rows(&mut report, &consts);
    out.report = report;
    let mut t = Table::new(&["draw", "atom"]);
    for (i, d) in draws.iter().enumerate() {
        for &a in d.atoms.atoms() {
            t.row(vec![i.to_string(), fmt_f64(a)]);
        }
    }
    out.table("limit_process.csv", t);
    out.table("cstar_profile.csv", profile_table(&consts));
    Ok(out)
}

fn ray_exponent(model: &CalibratedModel, n_grid: &[usize], eps: f64, mc: &McConfig) -> Result<Outputs, CliError> {
    let top = *n_grid.last().unwrap();
    let req = StatsRequest { extremal: false, ray_windows: n_grid.iter().map(|&n| RayWindow { n, eps }).collect() };
    let runs = mc.run(purpose::TREE, |_, rng| simulate_tree(model, top, TreeMode::FrontierOnly, &req, rng, mc.pop_cap).map(|r| r.summaries));
    let (runs, lost) = split_capacity(runs)?;
    let mut t = Table::new(&["rep", "n", "ray_stat"]);
    let mut report = Report::new("ray-exponent");
    let mut medians = Vec::new();
    for &n in n_grid {
        let mut alive = Vec::new();
        for (rep, r) in runs.iter().enumerate() {
            let s = r[n].ray_stat.unwrap_or(f64::INFINITY);
            t.row(vec![rep.to_string(), n.to_string(), fmt_f64(s)]);
            if s.is_finite() {
                alive.push(s);
            }
        }
        let (lo, hi) = alive.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
        let med = if alive.is_empty() { f64::NAN } else { median(&alive) };
        medians.push(med);
        report.push(ReportRow::new("ray_stat_min", n, lo, 0.0, 0.05, Verdict::from_bool(lo > 0.05)));
        report.push(ReportRow::new("ray_stat_max", n, hi, 0.0, 20.0, Verdict::from_bool(hi < 20.0)));
        report.push(ReportRow::new("ray_stat_median", n, med, 0.0, f64::NAN, Verdict::Info));
    }
    for (k, w) in medians.windows(2).enumerate() {
        let ratio = w[1] / w[0];
        report.push(ReportRow::new("ray_median_ratio", n_grid[k + 1], ratio, 0.0, 2.0, Verdict::from_bool((0.5..=2.0).contains(&ratio))));
    }
    let mut out = Outputs::new(report);
    out.batch(mc.reps, lost);
    out.table("ray_stats.csv", t);
    Ok(out)
}
