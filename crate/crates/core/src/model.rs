//! Displacement/offspring law family, calibration and the deterministic
//! centering schedule.
//!
//! The spine step `X` has density
//!
//! ```text
//! f_X(x) = ell_inf |x|^a exp(-lambda |x|^b)                   x <= x0
//!        = (1 - p_left) * N(right_mu, right_sigma^2 | x > x0)  x >  x0
//! ```
//!
//! and the children of a particle are displaced by i.i.d. `Y` with density
//! `e^y f_X(y) / E[nu]`, so that `E[sum e^{-Y_i}] = 1`.

use serde::{Deserialize, Serialize};

use crate::error::{BrwError, Result};
use crate::quad;
use crate::special::{ln_gamma, ln_upper_gamma_reg, norm_cdf, norm_pdf, norm_sf};

/// Quadrature tolerances used throughout the model.
pub const QUAD_ABS_TOL: f64 = 1e-10;
pub const QUAD_REL_TOL: f64 = 1e-12;
/// Slack added above the strict inequalities constraining `A1`, `A2`.
pub const SCHEDULE_MARGIN: f64 = 0.1;
/// Upper end of the linear scan for `n_min`.
pub const N_MIN_SCAN_LIMIT: usize = 20_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum OffspringLaw {
    /// `nu = 1 + Poisson(E[nu] - 1)`; never zero.
    ShiftedPoisson,
    /// `nu = k` with probability `p`, else 0.
    TwoPoint { k: u32, p: f64 },
    /// Always two children.
    DiscreteToy,
}

fn default_mu_range() -> [f64; 2] {
    [-5.0, 5.0]
}

fn default_name() -> String {
    "unnamed".to_string()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    #[serde(default = "default_name")]
    pub name: String,
    pub a: f64,
    pub lambda: f64,
    pub b: f64,
    pub x0: f64,
    pub ell_inf: f64,
    /// Initial guess; `calibrate` overwrites it.
    pub right_mu: f64,
    pub right_sigma: f64,
    pub offspring: OffspringLaw,
    pub target_mean_offspring: f64,
    /// Scan range for `right_mu` during calibration.
    #[serde(default = "default_mu_range")]
    pub right_mu_range: [f64; 2],
}

impl ModelSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(BrwError::InvalidModel(msg.to_string()));
        if !(self.a > -1.0) {
            return bad("a must exceed -1");
        }
        if !(self.lambda > 0.0) {
            return bad("lambda must be positive");
        }
        if !(self.b > 0.0 && self.b < 1.0) {
            return bad("b must lie in (0, 1)");
        }
        if !(self.x0 < 0.0) {
            return bad("x0 must be negative");
        }
        if !(self.ell_inf >= 0.0) {
            return bad("ell_inf must be non-negative");
        }
        if !(self.right_sigma > 0.0) {
            return bad("right_sigma must be positive");
        }
        if !(self.right_mu_range[0] < self.right_mu_range[1]) {
            return bad("right_mu_range must be increasing");
        }
        if matches!(self.offspring, OffspringLaw::DiscreteToy) {
            return bad("DiscreteToy offspring is reserved for discrete_toy_model()");
        }
        if !(self.target_mean_offspring > 1.0) {
            return Err(BrwError::InvalidModel(format!(
                "supercriticality requires E[nu] > 1, got {}",
                self.target_mean_offspring
            )));
        }
        if let OffspringLaw::TwoPoint { k, p } = self.offspring {
            if !(p > 0.0 && p <= 1.0) || k == 0 {
                return bad("TwoPoint needs k >= 1 and p in (0, 1]");
            }
            if (k as f64 * p - self.target_mean_offspring).abs() > 1e-12 {
                return bad("TwoPoint requires k * p == target_mean_offspring");
            }
        }
        Ok(())
    }

    /// Whether the spec lies in the regime b < 1/2 covered by the limit theorems.
    pub fn in_theorem_regime(&self) -> bool {
        self.b < 0.5
    }

    pub fn content_hash(&self) -> String {
        let text = serde_json::to_string(self).expect("spec serializes");
        format!("{:016x}", fnv1a64(text.as_bytes()))
    }
}

pub(crate) fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Normalized spine-step density `f_X` for a [`ModelSpec`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpineDensity {
    pub spec: ModelSpec,
    pub p_left: f64,
    /// Gamma shape `(a+1)/b` of `lambda |X|^b` on the left branch.
    pub gamma_shape: f64,
    /// Lower cutoff `lambda |x0|^b` of that Gamma variable.
    pub gamma_cut: f64,
    /// `ln(ell_inf / (b lambda^{(a+1)/b}))`.
    pub ln_left_const: f64,
    /// `1 - Phi((x0 - mu) / sigma)`.
    pub right_norm: f64,
}

pub fn build_spine_density(spec: &ModelSpec) -> Result<SpineDensity> {
    spec.validate()?;
    let s = (spec.a + 1.0) / spec.b;
    let cut = spec.lambda * spec.x0.abs().powf(spec.b);
    let ln_left_const = spec.ell_inf.ln() - spec.b.ln() - s * spec.lambda.ln();
    let p_left = if spec.ell_inf == 0.0 {
        0.0
    } else {
        (ln_left_const + ln_gamma(s) + ln_upper_gamma_reg(s, cut)).exp()
    };
    if p_left >= 1.0 {
        return Err(BrwError::MassOverflow { p_left });
    }
    let right_norm = norm_sf((spec.x0 - spec.right_mu) / spec.right_sigma);
    if right_norm <= 0.0 {
        return Err(BrwError::InvalidModel("right part has no mass above x0".into()));
    }
    Ok(SpineDensity {
        spec: spec.clone(),
        p_left,
        gamma_shape: s,
        gamma_cut: cut,
        ln_left_const,
        right_norm,
    })
}

impl SpineDensity {
    pub fn pdf(&self, x: f64) -> f64 {
        let sp = &self.spec;
        if x <= sp.x0 {
            let t = -x;
            sp.ell_inf * t.powf(sp.a) * (-sp.lambda * t.powf(sp.b)).exp()
        } else {
            let z = (x - sp.right_mu) / sp.right_sigma;
            (1.0 - self.p_left) * norm_pdf(z) / (sp.right_sigma * self.right_norm)
        }
    }

    /// `ln P(X <= -t)` for `t >= |x0|` via the incomplete Gamma closed form.
    pub fn ln_tail_prob(&self, t: f64) -> f64 {
        let sp = &self.spec;
        debug_assert!(t >= -sp.x0 - 1e-12);
        if sp.ell_inf == 0.0 {
            return f64::NEG_INFINITY;
        }
        let z = sp.lambda * t.powf(sp.b);
        self.ln_left_const + ln_gamma(self.gamma_shape) + ln_upper_gamma_reg(self.gamma_shape, z)
    }

    /// Closed-form CDF.
    pub fn cdf(&self, x: f64) -> f64 {
        let sp = &self.spec;
        if x <= sp.x0 {
            self.ln_tail_prob(-x).exp()
        } else {
            let lo = norm_cdf((sp.x0 - sp.right_mu) / sp.right_sigma);
            let hi = norm_cdf((x - sp.right_mu) / sp.right_sigma);
            self.p_left + (1.0 - self.p_left) * ((hi - lo) / self.right_norm).min(1.0)
        }
    }

    /// CDF by adaptive quadrature of the density.
    pub fn cdf_quadrature(&self, x: f64) -> Result<f64> {
        let sp = &self.spec;
        let left_upto = |t_min: f64| -> Result<f64> {
            // ∫_{-inf}^{-t_min} f_X, substituted z = lambda t^b.
            let lo = sp.lambda * t_min.powf(sp.b);
            self.left_integral(|_| 1.0, lo)
        };
        if x <= sp.x0 {
            return left_upto(-x);
        }
        let right = quad::gauss_kronrod(|y| self.pdf(y), sp.x0, x, QUAD_ABS_TOL, QUAD_REL_TOL)?;
        Ok(self.p_left + right.value)
    }

    /// `∫_{-inf}^{x0'} h(x) f_X(x) dx` where `x0' = -(z_lo/lambda)^{1/b}`, evaluated in the
    /// Gamma variable `z = lambda |x|^b`.
    pub fn left_integral<H: Fn(f64) -> f64>(&self, h: H, z_lo: f64) -> Result<f64> {
        let sp = &self.spec;
        if sp.ell_inf == 0.0 {
            return Ok(0.0);
        }
        let s = self.gamma_shape;
        let lnc = self.ln_left_const;
        let inv_b = 1.0 / sp.b;
        let lambda = sp.lambda;
        let integrand = |z: f64| {
            if z <= 0.0 {
                return 0.0;
            }
            let x = -(z / lambda).powf(inv_b);
            let w = (lnc + (s - 1.0) * z.ln() - z).exp();
            if w == 0.0 {
                0.0
            } else {
                h(x) * w
            }
        };
        Ok(quad::gauss_kronrod_upper(integrand, z_lo, QUAD_ABS_TOL * 1e-2, QUAD_REL_TOL)?.value)
    }

    /// `∫ h(x) f_X(x) dx` over `z_lo <= lambda |x|^b <= z_hi` on the left branch.
    pub fn left_integral_between<H: Fn(f64) -> f64>(&self, h: H, z_lo: f64, z_hi: f64) -> Result<f64> {
        let sp = &self.spec;
        if sp.ell_inf == 0.0 || z_hi <= z_lo {
            return Ok(0.0);
        }
        let s = self.gamma_shape;
        let lnc = self.ln_left_const;
        let inv_b = 1.0 / sp.b;
        let lambda = sp.lambda;
        let integrand = |z: f64| {
            let x = -(z / lambda).powf(inv_b);
            h(x) * (lnc + (s - 1.0) * z.ln() - z).exp()
        };
        Ok(quad::gauss_kronrod(integrand, z_lo, z_hi, QUAD_ABS_TOL * 1e-2, QUAD_REL_TOL)?.value)
    }

    /// `∫_{x0}^{inf} h(x) f_X(x) dx`. `tilt` bounds the exponential growth of `h`
    /// (`|h(x)| <~ e^{tilt x}`) and shifts the integration window accordingly.
    pub fn right_integral<H: Fn(f64) -> f64>(&self, h: H, tilt: f64) -> Result<f64> {
        self.right_integral_from(h, tilt, self.spec.x0)
    }

    /// As [`Self::right_integral`] restricted to `x >= from` (`from >= x0`).
    pub fn right_integral_from<H: Fn(f64) -> f64>(&self, h: H, tilt: f64, from: f64) -> Result<f64> {
        let sp = &self.spec;
        let (mu, sigma) = (sp.right_mu, sp.right_sigma);
        let center = mu + tilt * sigma * sigma;
        let lo = from.max(sp.x0).max(center - 40.0 * sigma);
        let hi = center + 40.0 * sigma;
        if hi <= lo {
            return Ok(0.0);
        }
        let r = quad::gauss_kronrod(|x| h(x) * self.pdf(x), lo, hi, QUAD_ABS_TOL * 1e-2, QUAD_REL_TOL)?;
        Ok(r.value)
    }

    /// `E[h(X)]` by quadrature.
    pub fn expect<H: Fn(f64) -> f64>(&self, h: H, tilt: f64) -> Result<f64> {
        Ok(self.left_integral(&h, self.gamma_cut)? + self.right_integral(&h, tilt)?)
    }

    /// Integral of the density over the real line (normalization check).
    pub fn total_mass(&self) -> Result<f64> {
        self.expect(|_| 1.0, 0.0)
    }

    /// Same normalization computed with adaptive Simpson in the original
    /// variable on both branches.
    pub fn total_mass_simpson(&self) -> Result<f64> {
        let sp = &self.spec;
        let left = if sp.ell_inf == 0.0 {
            0.0
        } else {
            // Map x in (-inf, x0] to u in (0, 1]: x = x0 - (1-u)/u.
            let g = |u: f64| {
                if u <= 0.0 {
                    return 0.0;
                }
                let x = sp.x0 - (1.0 - u) / u;
                let v = self.pdf(x) / (u * u);
                if v.is_finite() {
                    v
                } else {
                    0.0
                }
            };
            quad::adaptive_simpson(g, 0.0, 1.0, 1e-12)?.value
        };
        let (mu, sigma) = (sp.right_mu, sp.right_sigma);
        let lo = sp.x0.max(mu - 40.0 * sigma);
        let right = quad::adaptive_simpson(|x| self.pdf(x), lo, mu + 40.0 * sigma, 1e-13)?.value;
        Ok(left + right)
    }

    /// `E[e^X]` restricted to the left branch.
    pub fn left_exp_moment(&self) -> Result<f64> {
        self.left_integral(|x| x.exp(), self.gamma_cut)
    }

    /// `(1 - p_left) E[e^Z | Z > x0]` for the truncated normal, by quadrature.
    pub fn right_exp_moment(&self) -> Result<f64> {
        self.right_integral(|x| x.exp(), 1.0)
    }
}

/// Closed-form `E[e^Z | Z > x0]` for `Z ~ N(mu, sigma^2)`.
pub fn truncated_normal_mgf(mu: f64, sigma: f64, x0: f64) -> f64 {
    let base = norm_sf((x0 - mu) / sigma);
    let tilted = norm_sf((x0 - mu - sigma * sigma) / sigma);
    (mu + 0.5 * sigma * sigma).exp() * tilted / base
}

/// Closed-form `E[Z | Z > x0]` for `Z ~ N(mu, sigma^2)`.
pub fn truncated_normal_mean(mu: f64, sigma: f64, x0: f64) -> f64 {
    let alpha = (x0 - mu) / sigma;
    mu + sigma * norm_pdf(alpha) / norm_sf(alpha)
}

/// Two-point displacement law of the exact-enumeration companion model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ToyLaw {
    /// Children move by `-down` with probability `p_down`, else by `+up`.
    pub down: f64,
    pub up: f64,
    pub p_down: f64,
}

impl ToyLaw {
    /// The two displacement values with their probabilities under P.
    pub fn atoms(&self) -> [(f64, f64); 2] {
        [(-self.down, self.p_down), (self.up, 1.0 - self.p_down)]
    }

    /// Law of X under the spine measure: P(X = y) = 2 P(Y = y) e^{-y}.
    pub fn spine_atoms(&self) -> [(f64, f64); 2] {
        let [(y0, p0), (y1, p1)] = self.atoms();
        [(y0, 2.0 * p0 * (-y0).exp()), (y1, 2.0 * p1 * (-y1).exp())]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StepLaw {
    Stretched(SpineDensity),
    Toy(ToyLaw),
}

/// Branch constants of the tilted child law `Y` (density `e^y f_X(y) / E[nu]`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TiltConstants {
    /// `P(Y <= x0)`.
    pub left_mass: f64,
    /// Acceptance probability of the left-branch rejection step, `E[e^{X - x0} | X <= x0]`.
    pub left_acceptance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibratedModel {
    pub name: String,
    pub law: StepLaw,
    pub offspring: OffspringLaw,
    /// Spine drift `E[X]`.
    pub m: f64,
    /// `E[nu] = E[e^X]`.
    pub mean_offspring: f64,
    pub p_left: f64,
    /// NaN (serialized as null) for models without a schedule.
    #[serde(deserialize_with = "crate::report::nan_from_null")]
    pub a1: f64,
    #[serde(deserialize_with = "crate::report::nan_from_null")]
    pub a2: f64,
    /// Start of the final run of generations with `theta_n > 0` (None: beyond the scan limit).
    pub n_min: Option<usize>,
    pub tilt: TiltConstants,
    pub phi_domain_note: String,
    /// Whether the stretched-exponential tail assumption holds.
    pub tail_compliant: bool,
    pub spec_hash: String,
}

impl CalibratedModel {
    pub fn density(&self) -> Option<&SpineDensity> {
        match &self.law {
            StepLaw::Stretched(d) => Some(d),
            StepLaw::Toy(_) => None,
        }
    }

    pub fn spec(&self) -> Option<&ModelSpec> {
        self.density().map(|d| &d.spec)
    }

    /// Density handle, or a domain error for the toy model.
    pub fn require_density(&self, what: &str) -> Result<&SpineDensity> {
        self.density().ok_or_else(|| {
            BrwError::domain(format!("{what} needs a stretched-exponential model; {} is the enumeration toy", self.name))
        })
    }

    /// `ell_inf * m^a`, the constant in front of every one-big-jump limit.
    pub fn jump_constant(&self) -> Result<f64> {
        let d = self.require_density("jump_constant")?;
        Ok(d.spec.ell_inf * self.m.powf(d.spec.a))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| BrwError::InvalidModel(e.to_string()))
    }
}

/// Solve for `right_mu` so that `E[e^X]` hits the target, then derive the
/// drift and the schedule constants.
pub fn calibrate(spec: &ModelSpec) -> Result<CalibratedModel> {
    spec.validate()?;
    let target = spec.target_mean_offspring;
    let objective = |mu: f64| -> Result<f64> {
        let mut s = spec.clone();
        s.right_mu = mu;
        let d = build_spine_density(&s)?;
        Ok(d.left_exp_moment()? + d.right_exp_moment()? - target)
    };

    // Scan the configured range for a sign change.
    // Below x0 - 8 sigma the right part carries no representable mass.
    let lo = spec.right_mu_range[0].max(spec.x0 - 8.0 * spec.right_sigma);
    let hi = spec.right_mu_range[1];
    if !(lo < hi) {
        return Err(BrwError::Calibration(format!("empty right_mu range [{lo}, {hi}]")));
    }
    let steps = 64;
    let mut prev_x = lo;
    let mut prev_f = objective(lo)?;
    let mut bracket = None;
    for i in 1..=steps {
        let x = lo + (hi - lo) * i as f64 / steps as f64;
        let fx = objective(x)?;
        if prev_f.signum() != fx.signum() || fx == 0.0 {
            bracket = Some((prev_x, x));
            break;
        }
        prev_x = x;
        prev_f = fx;
    }
    let (a, b) = bracket.ok_or_else(|| {
        BrwError::Calibration(format!(
            "E[e^X] - target has no sign change for right_mu in [{lo}, {hi}]"
        ))
    })?;
    let mu = quad::brent(objective, a, b, 1e-15, 200)?;

    let mut calibrated = spec.clone();
    calibrated.right_mu = mu;
    let density = build_spine_density(&calibrated)?;
    let mean_offspring = density.left_exp_moment()? + density.right_exp_moment()?;
    if (mean_offspring - target).abs() > 1e-9 {
        return Err(BrwError::Calibration(format!(
            "E[e^X] = {mean_offspring} misses target {target}"
        )));
    }
    let m = density.expect(|x| x, 0.0)?;
    if !(m > 0.0) {
        return Err(BrwError::Drift { m });
    }

    let (a1, a2) = schedule_constants(&calibrated, m);
    let left_e = density.left_exp_moment()?;
    let tilt = TiltConstants {
        left_mass: left_e / mean_offspring,
        left_acceptance: if density.p_left > 0.0 {
            left_e / (density.p_left * calibrated.x0.exp())
        } else {
            1.0
        },
    };
    let mut model = CalibratedModel {
        name: calibrated.name.clone(),
        spec_hash: calibrated.content_hash(),
        offspring: calibrated.offspring.clone(),
        p_left: density.p_left,
        law: StepLaw::Stretched(density),
        m,
        mean_offspring,
        a1,
        a2,
        n_min: None,
        tilt,
        phi_domain_note: "case II: phi(beta) = +inf for every beta > 1 (left tail is subexponential)".into(),
        tail_compliant: calibrated.ell_inf > 0.0,
    };
    model.n_min = find_n_min(&model);
    Ok(model)
}

/// `A2 = a + 1 + 2(1-b) + margin` and `A1` with the same slack above its bound.
pub fn schedule_constants(spec: &ModelSpec, m: f64) -> (f64, f64) {
    let (a, b, lambda) = (spec.a, spec.b, spec.lambda);
    let a2 = a + 1.0 + 2.0 * (1.0 - b) + SCHEDULE_MARGIN;
    let a1 = (a2 - a + 2.0 + SCHEDULE_MARGIN) / ((1.0 - b) * lambda * m.powf(b - 1.0));
    (a1, a2)
}

/// Deterministic schedule quantities at generation `n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub n: usize,
    pub alpha_n: f64,
    pub zeta_n: f64,
    pub zeta_hat_n: f64,
    /// NaN when `zeta_hat_n <= 0`.
    pub theta_n: f64,
}

impl Schedule {
    pub fn theta_positive(&self) -> bool {
        self.theta_n > 0.0
    }
}

pub fn schedule(model: &CalibratedModel, n: usize) -> Result<Schedule> {
    if n < 1 {
        return Err(BrwError::domain("schedule is defined for n >= 1 only"));
    }
    let spec = model.require_density("schedule")?.spec.clone();
    Ok(schedule_raw(&spec, model.m, model.a1, model.a2, n))
}

fn schedule_raw(spec: &ModelSpec, m: f64, a1: f64, a2: f64, n: usize) -> Schedule {
    let nf = n as f64;
    let (a, b, lambda) = (spec.a, spec.b, spec.lambda);
    let ln_n = nf.ln();
    let alpha_n = lambda * (m * nf).powf(b) - a * ln_n;
    let zeta_n = m * nf - a1 * nf.powf(1.0 - b) * ln_n;
    let zeta_hat_n = zeta_n + m;
    let theta_n = if zeta_hat_n > 0.0 {
        lambda * zeta_hat_n.powf(b - 1.0) - a2 * zeta_hat_n.ln() / zeta_hat_n
    } else {
        f64::NAN
    };
    Schedule { n, alpha_n, zeta_n, zeta_hat_n, theta_n }
}

fn find_n_min(model: &CalibratedModel) -> Option<usize> {
    let spec = model.spec()?.clone();
    let mut last_bad = 0usize;
    for n in 1..=N_MIN_SCAN_LIMIT {
        let s = schedule_raw(&spec, model.m, model.a1, model.a2, n);
        if !(s.theta_n > 0.0) {
            last_bad = n;
        }
    }
    if last_bad == N_MIN_SCAN_LIMIT {
        None
    } else {
        Some(last_bad + 1)
    }
}

/// Log-generating function `phi(beta) = ln E[e^{-(beta-1) X}]`; `+inf` past 1
/// for stretched-exponential laws.
pub fn log_generating_function(model: &CalibratedModel, beta: f64) -> Result<f64> {
    match &model.law {
        StepLaw::Toy(t) => {
            let s: f64 = t.atoms().iter().map(|&(y, p)| p * (-beta * y).exp()).sum();
            Ok((2.0 * s).ln())
        }
        StepLaw::Stretched(d) => {
            if beta > 1.0 && d.spec.ell_inf > 0.0 {
                return Ok(f64::INFINITY);
            }
            let t = 1.0 - beta;
            Ok(d.expect(|x| (t * x).exp(), t)?.ln())
        }
    }
}

/// The two-child enumeration companion: `Y = -ln 2` w.p. 1/8, `Y = ln(7/2)` otherwise.
///
/// `2 (p e^{d} + (1-p) e^{-u}) = 2 (1/4 + 1/4) = 1`, so `phi(1) = 0`, and the
/// spine step is `-ln 2` or `ln(7/2)` with probability 1/2 each.
pub fn discrete_toy_model() -> CalibratedModel {
    let law = ToyLaw { down: 2f64.ln(), up: 3.5f64.ln(), p_down: 0.125 };
    let m = law.spine_atoms().iter().map(|&(x, p)| x * p).sum();
    CalibratedModel {
        name: "discrete-toy".into(),
        law: StepLaw::Toy(law),
        offspring: OffspringLaw::DiscreteToy,
        m,
        mean_offspring: 2.0,
        p_left: 0.0,
        a1: f64::NAN,
        a2: f64::NAN,
        n_min: None,
        tilt: TiltConstants { left_mass: 0.0, left_acceptance: 1.0 },
        phi_domain_note: "lattice two-point law; phi finite everywhere (not case II)".into(),
        tail_compliant: false,
        spec_hash: format!("{:016x}", fnv1a64(b"discrete-toy:ln2:ln3.5:0.125")),
    }
}

/// Named model presets.
pub fn preset(name: &str) -> Option<ModelSpec> {
    let base = |name: &str| ModelSpec {
        name: name.to_string(),
        a: 0.0,
        lambda: 2.0,
        b: 0.4,
        x0: -1.0,
        ell_inf: 0.05,
        right_mu: 0.0,
        right_sigma: 0.1,
        offspring: OffspringLaw::ShiftedPoisson,
        target_mean_offspring: 1.05,
        right_mu_range: default_mu_range(),
    };
    match name {
        "p1" => Some(ModelSpec { ell_inf: 0.01, ..base("p1") }),
        "p2-walk" => Some(ModelSpec {
            lambda: 9.0,
            b: 0.25,
            right_sigma: 0.5,
            target_mean_offspring: 20.0,
            ..base("p2-walk")
        }),
        "p3-heavy" => Some(ModelSpec { target_mean_offspring: 1.2, ..base("p3-heavy") }),
        _ => None,
    }
}

pub const PRESET_NAMES: [&str; 3] = ["p1", "p2-walk", "p3-heavy"];

/// Integral of the density by the two independent strategies.
pub fn normalization_pair(d: &SpineDensity) -> Result<(f64, f64)> {
    Ok((d.total_mass()?, d.total_mass_simpson()?))
}
