//! Limit objects: `C*`, `C*(f)`, the limiting law of the centered minimum and
//! the decorated Poisson limit `E_∞` of the extremal process.

use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::brw::{grow, split_capacity, Generation, GrowConfig, Measure};
use crate::error::{BrwError, Result};
use crate::measure::PointMeasure;
use crate::model::{schedule, CalibratedModel};
use crate::par::McConfig;
use crate::quad::composite_simpson;
use crate::report::{Report, ReportRow, Verdict};
use crate::rng::{purpose, RngStream};
use crate::stats::{ols_slope, EstimateWithError, Welford};

/// Panels of the `z`-quadrature in `C*(f)`.
pub const CSTAR_F_PANELS: usize = 64;
/// Series stops after this many consecutive terms below [`CSTAR_TERM_FLOOR`].
pub const CSTAR_STOP_RUN: usize = 3;
pub const CSTAR_TERM_FLOOR: f64 = 1e-4;
/// Slack of the "nonincreasing gap" trend checks.
pub const TREND_SLACK: f64 = 0.02;

/// Non-negative continuous test function supported in `(-inf, R_f)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum TestFunction {
    /// `min(1, (x_right - y)^+)`.
    HalfSpaceSmooth { x_right: f64 },
    /// Tent of the given height on `[center - width, center + width]`.
    Bump { center: f64, width: f64, height: f64 },
    /// `theta * inner`.
    Scaled { inner: Box<TestFunction>, theta: f64 },
}

impl TestFunction {
    pub fn eval(&self, y: f64) -> f64 {
        match self {
            TestFunction::HalfSpaceSmooth { x_right } => (x_right - y).clamp(0.0, 1.0),
            TestFunction::Bump { center, width, height } => height * (1.0 - (y - center).abs() / width).max(0.0),
            TestFunction::Scaled { inner, theta } => theta * inner.eval(y),
        }
    }

    /// Right edge `R_f` of the support.
    pub fn support_right(&self) -> f64 {
        match self {
            TestFunction::HalfSpaceSmooth { x_right } => *x_right,
            TestFunction::Bump { center, width, .. } => center + width,
            TestFunction::Scaled { inner, .. } => inner.support_right(),
        }
    }

    /// `f_x = f(. + x)`.
    pub fn shifted(&self, x: f64) -> TestFunction {
        match self {
            TestFunction::HalfSpaceSmooth { x_right } => TestFunction::HalfSpaceSmooth { x_right: x_right - x },
            TestFunction::Bump { center, width, height } => {
                TestFunction::Bump { center: center - x, width: *width, height: *height }
            }
            TestFunction::Scaled { inner, theta } => TestFunction::Scaled { inner: Box::new(inner.shifted(x)), theta: *theta },
        }
    }

    pub fn scaled(&self, theta: f64) -> TestFunction {
        TestFunction::Scaled { inner: Box::new(self.clone()), theta }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            TestFunction::HalfSpaceSmooth { x_right } if x_right.is_finite() => Ok(()),
            TestFunction::Bump { center, width, height } if center.is_finite() && *width > 0.0 && *height >= 0.0 => Ok(()),
            TestFunction::Scaled { inner, theta } if *theta >= 0.0 => inner.validate(),
            _ => Err(BrwError::domain(format!("not a valid test function: {self:?}"))),
        }
    }

    pub fn label(&self) -> String {
        match self {
            TestFunction::HalfSpaceSmooth { x_right } => format!("halfspace({x_right})"),
            TestFunction::Bump { center, width, height } => format!("bump({center},{width},{height})"),
            TestFunction::Scaled { inner, theta } => format!("{theta}*{}", inner.label()),
        }
    }

    /// `sum_i f(atoms_i)` for sorted atoms, stopping at the support edge.
    pub fn sum_over(&self, sorted_atoms: &[f64]) -> f64 {
        let r = self.support_right();
        sorted_atoms.iter().take_while(|&&a| a < r).map(|&a| self.eval(a)).sum()
    }

    /// The fixed three-function battery.
    pub fn default_battery() -> Vec<TestFunction> {
        let bump = TestFunction::Bump { center: 0.0, width: 2.0, height: 1.0 };
        vec![TestFunction::HalfSpaceSmooth { x_right: 1.0 }, bump.clone(), bump.scaled(0.3)]
    }
}

/// Sampling scheme for `E[e^{-M_j}]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Scheme {
    /// Plain mean of `e^{-M_j}` under P.
    Direct,
    /// `E_Q[e^{-M_j} / W_j]`, integrand in `[0, 1]`.
    SpineIs,
}

/// Estimates of `E[e^{-M_j}]` for `j = 0..=j_max` from one batch of trees.
pub fn e_minus_m_profile(model: &CalibratedModel, j_max: usize, scheme: Scheme, mc: &McConfig) -> Result<(Vec<EstimateWithError>, usize)> {
    let (measure, salt_purpose) = match scheme {
        Scheme::Direct => (Measure::P, purpose::TREE),
        Scheme::SpineIs => (Measure::Q, purpose::SPINE_TREE),
    };
    let runs = mc.run(salt_purpose, |_, rng| -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(j_max + 1);
        grow(model, GrowConfig::new(j_max, measure).pop_cap(mc.pop_cap), rng, &mut |g: &Generation| {
            let e = (-g.min()).exp();
            let w = g.w();
            if w < e {
                return Err(BrwError::Invariant(format!("W_{} = {w:e} below e^(-M) = {e:e}", g.n)));
            }
            out.push(match scheme {
                Scheme::Direct => e,
                Scheme::SpineIs => e / w,
            });
            Ok(())
        })?;
        Ok(out)
    });
    let (runs, lost) = split_capacity(runs)?;
    let mut acc = vec![Welford::default(); j_max + 1];
    for r in &runs {
        for (a, &v) in acc.iter_mut().zip(r) {
            a.push(v);
        }
    }
    Ok((acc.iter().map(|a| a.estimate()).collect(), lost))
}

pub fn estimate_e_minus_m(model: &CalibratedModel, j: usize, scheme: Scheme, mc: &McConfig) -> Result<EstimateWithError> {
    if j == 0 {
        return Ok(EstimateWithError { value: 1.0, se: 0.0, n: mc.reps as u64 });
    }
    let (p, lost) = e_minus_m_profile(model, j, scheme, mc)?;
    if lost * 10 > mc.reps {
        return Err(BrwError::Capacity { generation: j, population: lost, cap: mc.reps / 10 });
    }
    Ok(p[j])
}

/// Everything one batch of size-biased trees yields about `C*` and `C*(f)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitLawEstimate {
    /// `sum_{j <= J} E[e^{-M_j}]`.
    pub cstar: EstimateWithError,
    /// `ell_inf m^a C*`.
    pub cstar0: EstimateWithError,
    pub j_trunc: usize,
    /// Whether three consecutive terms fell below the floor before `j_max`.
    pub converged: bool,
    /// Per-`j` estimates of `E[e^{-M_j}]`.
    pub profile: Vec<EstimateWithError>,
    /// Extrapolated tail `sum_{j > J}` from the fitted decay; `None` when the fit does not decay.
    pub fitted_tail: Option<f64>,
    /// Bound used for the truncation: the fitted tail, or `+inf` without one.
    pub tail_bound: f64,
    pub functions: Vec<TestFunctionConstants>,
    /// Largest change of the `z`-integral when the panel count is doubled.
    pub quad_doubling_gap: f64,
    pub lost: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestFunctionConstants {
    pub f: TestFunction,
    /// `C*(f)`.
    pub cstar_f: EstimateWithError,
    /// `C*(f) - C*(0)`, estimated directly from the `z`-integrals.
    pub delta: EstimateWithError,
}

/// `∫_0^{R} e^z (1 - exp(-sum_v f(a_v + z))) dz` for sorted gaps `a_v = V(v) - M_j >= 0`.
pub fn z_integral(f: &TestFunction, gaps: &[f64], panels: usize) -> f64 {
    let r = f.support_right();
    if r <= 0.0 {
        return 0.0;
    }
    let near: Vec<f64> = gaps.iter().copied().take_while(|&a| a < r).collect();
    if near.is_empty() {
        return 0.0;
    }
    composite_simpson(|z| z.exp() * -(-near.iter().map(|&a| f.eval(a + z)).sum::<f64>()).exp_m1(), 0.0, r, panels)
}

/// `C*` and `C*(f)` for a battery from size-biased trees grown to `j_max`.
/// The series is cut at the first `J` after which three consecutive terms
/// fall below `1e-4`.
pub fn estimate_limit_constants(model: &CalibratedModel, j_max: usize, battery: &[TestFunction], mc: &McConfig) -> Result<LimitLawEstimate> {
    for f in battery {
        f.validate()?;
    }
    let nf = battery.len();
    let reach = battery.iter().map(|f| f.support_right()).fold(0.0, f64::max);
    // per tree: for each j, (e^{-M_j}/W_j, z-integrals, doubling gap)
    let runs = mc.run(purpose::SPINE_TREE, |_, rng| -> Result<(Vec<f64>, Vec<f64>, f64)> {
        let mut weights = Vec::with_capacity(j_max + 1);
        let mut ints = Vec::with_capacity((j_max + 1) * nf);
        let mut gap = 0.0f64;
        let mut near = Vec::new();
        grow(model, GrowConfig::new(j_max, Measure::Q).pop_cap(mc.pop_cap), rng, &mut |g: &Generation| {
            let m = g.min();
            let (e, w) = ((-m).exp(), g.w());
            if w < e {
                return Err(BrwError::Invariant(format!("W_{} = {w:e} below e^(-M) = {e:e}", g.n)));
            }
            weights.push(e / w);
            near.clear();
            near.extend(g.positions.iter().map(|v| v - m).filter(|&a| a < reach));
            near.sort_by(f64::total_cmp);
            for f in battery {
                let v = z_integral(f, &near, CSTAR_F_PANELS);
                if g.n < 4 {
                    gap = gap.max((z_integral(f, &near, 2 * CSTAR_F_PANELS) - v).abs());
                }
                ints.push(v);
            }
            Ok(())
        })?;
        Ok((weights, ints, gap))
    });
    let (runs, lost) = split_capacity(runs)?;
    if runs.is_empty() {
        return Err(BrwError::Capacity { generation: j_max, population: lost, cap: mc.pop_cap });
    }
    let mut prof = vec![Welford::default(); j_max + 1];
    for (w, _, _) in &runs {
        for (a, &v) in prof.iter_mut().zip(w) {
            a.push(v);
        }
    }
    let profile: Vec<EstimateWithError> = prof.iter().map(|a| a.estimate()).collect();
    let mut j_trunc = j_max;
    let mut converged = false;
    let mut streak = 0;
    for (j, e) in profile.iter().enumerate() {
        streak = if e.value < CSTAR_TERM_FLOOR { streak + 1 } else { 0 };
        if streak == CSTAR_STOP_RUN {
            j_trunc = j;
            converged = true;
            break;
        }
    }

    let mut cs = Welford::default();
    let mut cf = vec![Welford::default(); nf];
    let mut dl = vec![Welford::default(); nf];
    let mut quad_doubling_gap = 0.0f64;
    for (w, ints, gap) in &runs {
        quad_doubling_gap = quad_doubling_gap.max(*gap);
        cs.push(w[..=j_trunc].iter().sum());
        for k in 0..nf {
            let d: f64 = (0..=j_trunc).map(|j| w[j] * ints[j * nf + k]).sum();
            let base: f64 = w[..=j_trunc].iter().sum();
            cf[k].push(base + d);
            dl[k].push(d);
        }
    }
    let c = model.jump_constant()?;
    let scale = |e: EstimateWithError| EstimateWithError { value: c * e.value, se: c * e.se, n: e.n };
    let cstar = cs.estimate();
    let fitted_tail = fit_tail(model, &profile, j_trunc);
    let functions = battery
        .iter()
        .zip(cf.iter().zip(&dl))
        .map(|(f, (a, b))| TestFunctionConstants { f: f.clone(), cstar_f: scale(a.estimate()), delta: scale(b.estimate()) })
        .collect();
    Ok(LimitLawEstimate {
        cstar,
        cstar0: scale(cstar),
        j_trunc,
        converged,
        profile,
        fitted_tail,
        tail_bound: fitted_tail.unwrap_or(f64::INFINITY),
        functions,
        quad_doubling_gap,
        lost,
    })
}

/// Fit `ln E[e^{-M_j}] = c - k (m j)^b` on the second half of `[1, J]` and sum
/// the fitted terms beyond `J`. `None` when the fit does not decay.
fn fit_tail(model: &CalibratedModel, profile: &[EstimateWithError], j_trunc: usize) -> Option<f64> {
    let b = model.density().map(|d| d.spec.b).unwrap_or(1.0);
    let m = model.m;
    let lo = (j_trunc / 2).max(1);
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for (j, e) in profile.iter().enumerate().take(j_trunc + 1).skip(lo) {
        if e.value > 0.0 {
            xs.push((m * j as f64).powf(b));
            ys.push(e.value.ln());
        }
    }
    let slope = ols_slope(&xs, &ys)?;
    if slope >= 0.0 {
        return None;
    }
    let mx = xs.iter().sum::<f64>() / xs.len() as f64;
    let my = ys.iter().sum::<f64>() / ys.len() as f64;
    let icpt = my - slope * mx;
    let mut total = 0.0;
    for j in (j_trunc + 1)..(j_trunc + 10_000_000) {
        let t = (icpt + slope * (m * j as f64).powf(b)).exp();
        total += t;
        if t < 1e-12 * total {
            return Some(total);
        }
    }
    None
}

/// `F(x) = mean_i exp(-C e^x W_i)`: the limit of `P(M_n > alpha_n + x)`.
pub fn limit_cdf(c: f64, w_samples: &[f64], x: f64) -> f64 {
    if w_samples.is_empty() {
        return f64::NAN;
    }
    let k = c * x.exp();
    w_samples.iter().map(|&w| (-k * w).exp()).sum::<f64>() / w_samples.len() as f64
}

/// `mean_i exp(-d W_i)` with the SE from the pool and from `d` (delta method).
pub fn laplace_of_w(d: EstimateWithError, w_samples: &[f64]) -> EstimateWithError {
    let vals: Vec<f64> = w_samples.iter().map(|&w| (-d.value * w).exp()).collect();
    let e = EstimateWithError::from_samples(&vals);
    let slope = w_samples.iter().zip(&vals).map(|(w, v)| w * v).sum::<f64>() / w_samples.len() as f64;
    EstimateWithError { value: e.value, se: e.se.hypot(slope * d.se), n: e.n }
}

/// Pool of `W_n` samples, the proxy for `W_∞`.
pub fn w_pool(model: &CalibratedModel, n_w: usize, mc: &McConfig) -> Result<(Vec<f64>, usize)> {
    let runs = mc.run(purpose::W_POOL, |_, rng| -> Result<f64> {
        let mut w = 0.0;
        grow(model, GrowConfig::new(n_w, Measure::P).pop_cap(mc.pop_cap), rng, &mut |g: &Generation| {
            if g.n == n_w {
                w = g.w();
            }
            Ok(())
        })?;
        Ok(w)
    });
    split_capacity(runs)
}

/// One draw of `E_∞` restricted to `[lo, hi]`, plus the expected number of
/// neglected decorations with `q > q_max`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitProcessDraw {
    pub w: f64,
    pub atoms: PointMeasure,
    pub trees: usize,
}

/// Exact sample of `E_∞` on `[lo, hi]` given `W = w`, for generations `q <= q_max`.
///
/// For fixed `q` the points `p` carry independent trees; writing `z = M_q - p`
/// the kept points form a Poisson process with intensity
/// `w ell m^a e^z dz` times the law `e^{-M_q} dP`, and all atoms `V(u) - M_q + z`
/// are `>= z`. Only `z <= hi` can reach the window. Trees are drawn under the
/// size-biased measure and kept with probability `e^{-M_q} / W_q`.
pub fn sample_limit_process(
    model: &CalibratedModel,
    w: f64,
    window: (f64, f64),
    q_max: usize,
    rng: &mut RngStream,
) -> Result<LimitProcessDraw> {
    let (lo, hi) = window;
    if !(hi >= lo) || !lo.is_finite() || !hi.is_finite() {
        return Err(BrwError::domain("window must be a bounded interval [lo, hi]"));
    }
    let c = model.jump_constant()?;
    let mut atoms = Vec::new();
    let mut trees = 0;
    if hi <= 0.0 || w <= 0.0 {
        return Ok(LimitProcessDraw { w, atoms: PointMeasure::empty(), trees });
    }
    let mass = w * c * hi.exp_m1();
    let pois = Poisson::new(mass).map_err(|e| BrwError::domain(format!("Poisson rate {mass}: {e}")))?;
    for q in 0..=q_max {
        let count = pois.sample(rng) as usize;
        for _ in 0..count {
            // z on [0, hi] with density proportional to e^z
            let z = (1.0 + rng.uniform() * hi.exp_m1()).ln();
            trees += 1;
            let mut kept: Option<Vec<f64>> = None;
            grow(model, GrowConfig::new(q, Measure::Q), rng, &mut |g: &Generation| {
                if g.n == q {
                    kept = Some(g.positions.to_vec());
                }
                Ok(())
            })?;
            let gen = kept.expect("generation q visited");
            let m = gen.iter().copied().fold(f64::INFINITY, f64::min);
            let wq: f64 = gen.iter().map(|&v| (-v).exp()).sum();
            if rng.uniform() < (-m).exp() / wq {
                atoms.extend(gen.iter().map(|&v| v - m + z).filter(|&a| a >= lo && a <= hi));
            }
        }
    }
    Ok(LimitProcessDraw { w, atoms: PointMeasure::new(atoms), trees })
}

/// Expected number of decorations with `q > q_max` that would reach `[.., hi]`,
/// given `E[W] = 1`: `ell m^a (e^hi - 1) * tail`.
pub fn limit_process_truncation(model: &CalibratedModel, hi: f64, tail: f64) -> Result<f64> {
    Ok(model.jump_constant()? * hi.max(0.0).exp_m1() * tail)
}

/// Draws of `E_∞` on a window with `W` taken from the pool in replicate order.
pub fn sample_limit_process_batch(
    model: &CalibratedModel,
    w_pool: &[f64],
    window: (f64, f64),
    q_max: usize,
    mc: &McConfig,
) -> Result<Vec<LimitProcessDraw>> {
    if w_pool.is_empty() {
        return Err(BrwError::domain("empty W pool"));
    }
    mc.run(purpose::LIMIT_PROCESS, |rep, rng| {
        let w = w_pool[rep % w_pool.len()];
        sample_limit_process(model, w, window, q_max, rng)
    })
    .into_iter()
    .collect()
}

/// Laplace functional of sampled `E_∞` against `E[exp(-(C*(f) - C*(0)) W)]`.
pub fn laplace_functional_report(
    draws: &[LimitProcessDraw],
    constants: &LimitLawEstimate,
    w_pool: &[f64],
) -> Report {
    let mut report = Report::new("limit-process-laplace");
    for tf in &constants.functions {
        let vals: Vec<f64> = draws.iter().map(|d| (-tf.f.sum_over(d.atoms.atoms())).exp()).collect();
        let emp = EstimateWithError::from_samples(&vals);
        let lim = laplace_of_w(tf.delta, w_pool);
        let ok = emp.z_score(&lim) <= 4.0;
        report.push(
            ReportRow::new(format!("laplace_{}", tf.f.label()), 0, emp.value, emp.se.hypot(lim.se), lim.value, Verdict::from_bool(ok))
                .with_ratio(emp.value / lim.value),
        );
    }
    report
}

/// Per-tree statistics at each generation of an n-grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtremalRow {
    pub n: usize,
    /// `M_n - alpha_n`.
    pub centered_min: f64,
    pub w: f64,
    /// `sum_u f(V(u) - alpha_n)` per battery function.
    pub functionals: Vec<f64>,
}

/// Grow trees to the largest `n` of the grid, recording centered minima, `W_n`
/// and battery sums at each grid point.
pub fn extremal_batch(model: &CalibratedModel, n_grid: &[usize], battery: &[TestFunction], mc: &McConfig) -> Result<(Vec<Vec<ExtremalRow>>, usize)> {
    let top = n_grid.iter().copied().max().unwrap_or(0);
    let alphas: Vec<f64> = n_grid.iter().map(|&n| schedule(model, n).map(|s| s.alpha_n)).collect::<Result<_>>()?;
    let runs = mc.run(purpose::TREE, |_, rng| -> Result<Vec<ExtremalRow>> {
        let mut rows = Vec::with_capacity(n_grid.len());
        grow(model, GrowConfig::new(top, Measure::P).pop_cap(mc.pop_cap), rng, &mut |g: &Generation| {
            if let Some(k) = n_grid.iter().position(|&n| n == g.n) {
                let alpha = alphas[k];
                let functionals = battery
                    .iter()
                    .map(|f| {
                        let r = f.support_right();
                        g.positions.iter().map(|v| v - alpha).filter(|&a| a < r).map(|a| f.eval(a)).sum()
                    })
                    .collect();
                rows.push(ExtremalRow { n: g.n, centered_min: g.min() - alpha, w: g.w(), functionals });
            }
            Ok(())
        })?;
        Ok(rows)
    });
    split_capacity(runs)
}

/// Rows of one limit-law table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitTableRow {
    pub x: f64,
    pub empirical: f64,
    pub limit: f64,
    pub gap: f64,
    pub se: f64,
}

/// Empirical `P(M_n - alpha_n > x)` against `limit_cdf(C*(0), W, x)` on an x-grid.
pub fn minimum_law_table(centered: &[f64], cstar0: f64, w_pool: &[f64], x_grid: &[f64]) -> Vec<LimitTableRow> {
    let k = centered.len() as f64;
    x_grid
        .iter()
        .map(|&x| {
            let p = centered.iter().filter(|&&c| c > x).count() as f64 / k;
            let limit = limit_cdf(cstar0, w_pool, x);
            LimitTableRow { x, empirical: p, limit, gap: (p - limit).abs(), se: (p * (1.0 - p) / k).sqrt() }
        })
        .collect()
}

/// Whether `gaps` (in grid order) never rise by more than `slack`.
pub fn nonincreasing_within(gaps: &[f64], slack: f64) -> bool {
    gaps.windows(2).all(|w| w[1] <= w[0] + slack)
}

/// Sup-gap per `n` of the minimum law and the trend verdict.
pub fn compare_minimum_law(
    batch: &[Vec<ExtremalRow>],
    n_grid: &[usize],
    cstar0: f64,
    w_pool: &[f64],
    x_grid: &[f64],
) -> (Report, Vec<(usize, Vec<LimitTableRow>)>) {
    let mut report = Report::new("minimum-law");
    let mut tables = Vec::new();
    let mut gaps = Vec::new();
    for (k, &n) in n_grid.iter().enumerate() {
        let centered: Vec<f64> = batch.iter().map(|r| r[k].centered_min).collect();
        let table = minimum_law_table(&centered, cstar0, w_pool, x_grid);
        let worst = table.iter().fold(None::<&LimitTableRow>, |acc, r| match acc {
            Some(a) if a.gap >= r.gap => Some(a),
            _ => Some(r),
        });
        let (gap, se) = worst.map(|r| (r.gap, r.se)).unwrap_or((f64::NAN, 0.0));
        report.push(ReportRow::new("kolmogorov_gap", n, gap, se, 1.0, Verdict::from_bool(gap <= 1.0)));
        gaps.push(gap);
        tables.push((n, table));
    }
    let ok = nonincreasing_within(&gaps, TREND_SLACK);
    let last = *n_grid.last().unwrap_or(&0);
    report.push(ReportRow::new("gap_trend", last, *gaps.last().unwrap_or(&f64::NAN), 0.0, TREND_SLACK, Verdict::from_bool(ok)));
    (report, tables)
}

/// Per-function gap `|E[exp(-sum f(V - alpha_n))] - E[exp(-(C*(f) - C*(0)) W)]|` per n.
pub fn compare_extremal(
    batch: &[Vec<ExtremalRow>],
    n_grid: &[usize],
    constants: &LimitLawEstimate,
    w_pool: &[f64],
) -> Report {
    let mut report = Report::new("extremal");
    for (fi, tf) in constants.functions.iter().enumerate() {
        let lim = laplace_of_w(tf.delta, w_pool);
        let mut gaps = Vec::new();
        for (k, &n) in n_grid.iter().enumerate() {
            let vals: Vec<f64> = batch.iter().map(|r| (-r[k].functionals[fi]).exp()).collect();
            let emp = EstimateWithError::from_samples(&vals);
            let gap = (emp.value - lim.value).abs();
            gaps.push(gap);
            report.push(
                ReportRow::new(format!("extremal_{}", tf.f.label()), n, emp.value, emp.se.hypot(lim.se), lim.value, Verdict::Info)
                    .with_ratio(gap),
            );
        }
        let ok = nonincreasing_within(&gaps, TREND_SLACK);
        let last = *n_grid.last().unwrap_or(&0);
        report.push(ReportRow::new(format!("extremal_trend_{}", tf.f.label()), last, *gaps.last().unwrap_or(&f64::NAN), 0.0, TREND_SLACK, Verdict::from_bool(ok)));
    }
    report
}

/// `E[e^{-sum f(V - alpha_n)} 1{M_n > alpha_n + x}]` from a batch at grid index `k`,
/// against `E[exp(-C*(f_x) e^x W)]` where `C*(f_x)` comes from `shifted`.
pub fn joint_min_functional(
    batch: &[Vec<ExtremalRow>],
    k: usize,
    fi: usize,
    x: f64,
    shifted: &TestFunctionConstants,
    w_pool: &[f64],
) -> (EstimateWithError, EstimateWithError) {
    let vals: Vec<f64> = batch
        .iter()
        .map(|r| if r[k].centered_min > x { (-r[k].functionals[fi]).exp() } else { 0.0 })
        .collect();
    let emp = EstimateWithError::from_samples(&vals);
    let c = shifted.cstar_f;
    let scale = x.exp();
    let lim = laplace_of_w(EstimateWithError { value: c.value * scale, se: c.se * scale, n: c.n }, w_pool);
    (emp, lim)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn test_functions_are_supported_left_of_edge() {
        for f in TestFunction::default_battery() {
            let r = f.support_right();
            assert_eq!(f.eval(r), 0.0);
            assert_eq!(f.eval(r + 1.0), 0.0);
            assert!(f.eval(r - 0.5) > 0.0);
        }
    }

    #[test]
    fn shift_convention() {
        let f = TestFunction::Bump { center: 1.0, width: 0.5, height: 2.0 };
        let g = f.shifted(0.3);
        for y in [-1.0, 0.4, 0.7, 0.9, 1.3] {
            assert!((g.eval(y) - f.eval(y + 0.3)).abs() < 1e-12);
        }
    }

    #[test]
    fn limit_cdf_edges() {
        let w = [0.5, 1.0, 2.0];
        assert!((limit_cdf(1.0, &w, -30.0) - 1.0).abs() < 1e-6);
        assert_eq!(limit_cdf(3.0, &[0.0, 0.0], 5.0), 1.0);
        let xs: Vec<f64> = (-40..40).map(|k| k as f64 * 0.25).collect();
        let fs: Vec<f64> = xs.iter().map(|&x| limit_cdf(1.3, &w, x)).collect();
        assert!(fs.windows(2).all(|p| p[1] <= p[0]));
    }

    #[test]
    fn z_integral_of_zero_function_vanishes() {
        let f = TestFunction::Bump { center: 1.0, width: 1.0, height: 0.0 };
        assert_eq!(z_integral(&f, &[0.0, 0.5], 64), 0.0);
        // single atom at 0 with the half-space function: ∫_0^1 e^z (1 - e^{-(1-z)}) dz
        let h = TestFunction::HalfSpaceSmooth { x_right: 1.0 };
        let exact = (1f64.exp() - 1.0) - (-1f64).exp() * (2f64.exp() - 1.0) / 2.0;
        let v = z_integral(&h, &[0.0], 64);
        let v2 = z_integral(&h, &[0.0], 128);
        assert!((v - exact).abs() < 1e-7, "{v} vs {exact}");
        assert!((v2 - exact).abs() < (v - exact).abs() / 10.0);
    }
}
