//! Exact samplers for the spine step `X`, the child displacement `Y`, the
//! offspring count and (size-biased) broods.

use rand_distr::{Distribution, Exp1, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{BrwError, Result};
use crate::model::{CalibratedModel, OffspringLaw, SpineDensity, StepLaw, ToyLaw};
use crate::rng::RngStream;
use crate::special::{inv_ln_upper_gamma_reg, ln_upper_gamma_reg, log_add_exp};

/// Cap on rejection rounds for one left-branch `Y` draw.
pub const MAX_REJECTION_ROUNDS: usize = 1_000_000;
const GAMMA_INV_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Brood {
    pub count: usize,
    pub displacements: Vec<f64>,
    pub spine_index: Option<usize>,
}

/// Per-model sampler with the offspring distribution prepared once.
#[derive(Clone, Debug)]
pub struct Sampler<'a> {
    pub model: &'a CalibratedModel,
    poisson: Option<Poisson<f64>>,
}

impl<'a> Sampler<'a> {
    pub fn new(model: &'a CalibratedModel) -> Self {
        let poisson = match model.offspring {
            OffspringLaw::ShiftedPoisson if model.mean_offspring > 1.0 => {
                Some(Poisson::new(model.mean_offspring - 1.0).expect("positive Poisson mean"))
            }
            _ => None,
        };
        Sampler { model, poisson }
    }

    pub fn x(&self, rng: &mut RngStream) -> f64 {
        match &self.model.law {
            StepLaw::Stretched(d) => sample_x_density(d, rng),
            StepLaw::Toy(t) => toy_draw(&t.spine_atoms(), rng),
        }
    }

    pub fn y(&self, rng: &mut RngStream) -> Result<f64> {
        match &self.model.law {
            StepLaw::Stretched(d) => {
                if rng.uniform() < self.model.tilt.left_mass {
                    sample_y_left(d, rng)
                } else {
                    let sp = &d.spec;
                    let s2 = sp.right_sigma * sp.right_sigma;
                    Ok(truncated_normal_above(sp.right_mu + s2, sp.right_sigma, sp.x0, rng))
                }
            }
            StepLaw::Toy(t) => Ok(toy_draw(&t.atoms(), rng)),
        }
    }

    pub fn offspring(&self, rng: &mut RngStream) -> usize {
        match self.model.offspring {
            OffspringLaw::ShiftedPoisson => 1 + self.poisson_draw(rng),
            OffspringLaw::TwoPoint { k, p } => {
                if rng.uniform() < p {
                    k as usize
                } else {
                    0
                }
            }
            OffspringLaw::DiscreteToy => 2,
        }
    }

    fn poisson_draw(&self, rng: &mut RngStream) -> usize {
        match &self.poisson {
            Some(p) => p.sample(rng) as usize,
            None => 0,
        }
    }

    /// Count with law `k P(nu = k) / E[nu]`.
    pub fn size_biased_offspring(&self, rng: &mut RngStream) -> usize {
        match self.model.offspring {
            OffspringLaw::ShiftedPoisson => {
                let mu = self.model.mean_offspring - 1.0;
                let extra = if rng.uniform() < 1.0 / (1.0 + mu) { 0 } else { 1 };
                1 + extra + self.poisson_draw(rng)
            }
            OffspringLaw::TwoPoint { k, .. } => k as usize,
            OffspringLaw::DiscreteToy => 2,
        }
    }

    pub fn brood(&self, rng: &mut RngStream) -> Result<Brood> {
        let count = self.offspring(rng);
        let mut displacements = Vec::with_capacity(count);
        for _ in 0..count {
            displacements.push(self.y(rng)?);
        }
        Ok(Brood { count, displacements, spine_index: None })
    }

    /// Append one brood's displacements to `out`; size-biased when `spine`
    /// is set, in which case the spine child's offset within the brood is returned.
    pub fn fill_brood(&self, rng: &mut RngStream, spine: bool, out: &mut Vec<f64>) -> Result<Option<usize>> {
        if spine {
            let count = self.size_biased_offspring(rng);
            let idx = rng.below(count);
            for i in 0..count {
                out.push(if i == idx { self.x(rng) } else { self.y(rng)? });
            }
            Ok(Some(idx))
        } else {
            let count = self.offspring(rng);
            for _ in 0..count {
                out.push(self.y(rng)?);
            }
            Ok(None)
        }
    }

    pub fn size_biased_brood(&self, rng: &mut RngStream) -> Result<Brood> {
        let count = self.size_biased_offspring(rng);
        let spine = rng.below(count);
        let mut displacements = Vec::with_capacity(count);
        for i in 0..count {
            displacements.push(if i == spine { self.x(rng) } else { self.y(rng)? });
        }
        Ok(Brood { count, displacements, spine_index: Some(spine) })
    }
}

fn toy_draw(atoms: &[(f64, f64); 2], rng: &mut RngStream) -> f64 {
    if rng.uniform() < atoms[0].1 {
        atoms[0].0
    } else {
        atoms[1].0
    }
}

/// `X` under the spine law.
pub fn sample_x(model: &CalibratedModel, rng: &mut RngStream) -> f64 {
    Sampler::new(model).x(rng)
}

pub fn sample_y(model: &CalibratedModel, rng: &mut RngStream) -> Result<f64> {
    Sampler::new(model).y(rng)
}

pub fn sample_offspring(model: &CalibratedModel, rng: &mut RngStream) -> usize {
    Sampler::new(model).offspring(rng)
}

pub fn sample_brood(model: &CalibratedModel, rng: &mut RngStream) -> Result<Brood> {
    Sampler::new(model).brood(rng)
}

pub fn sample_size_biased_brood(model: &CalibratedModel, rng: &mut RngStream) -> Result<Brood> {
    Sampler::new(model).size_biased_brood(rng)
}

pub(crate) fn sample_x_density(d: &SpineDensity, rng: &mut RngStream) -> f64 {
    if rng.uniform() < d.p_left {
        sample_x_left(d, rng)
    } else {
        let sp = &d.spec;
        truncated_normal_above(sp.right_mu, sp.right_sigma, sp.x0, rng)
    }
}

/// Left branch: `W ~ Gamma((a+1)/b)` truncated to `[lambda |x0|^b, inf)`, `X = -(W/lambda)^{1/b}`.
pub fn sample_x_left(d: &SpineDensity, rng: &mut RngStream) -> f64 {
    let w = truncated_gamma_above(d.gamma_shape, d.gamma_cut, rng);
    -(w / d.spec.lambda).powf(1.0 / d.spec.b)
}

/// Gamma(shape `s`) conditioned on `W >= c`, by inversion of the upper tail.
pub fn truncated_gamma_above(s: f64, c: f64, rng: &mut RngStream) -> f64 {
    let target = ln_upper_gamma_reg(s, c) + rng.uniform().ln();
    inv_ln_upper_gamma_reg(s, target, c, GAMMA_INV_TOL)
}

/// Gamma(shape `s`) conditioned on `c1 <= W <= c2`, by inversion.
pub fn truncated_gamma_between(s: f64, c1: f64, c2: f64, rng: &mut RngStream) -> f64 {
    let lq1 = ln_upper_gamma_reg(s, c1);
    let lq2 = ln_upper_gamma_reg(s, c2);
    let u = rng.uniform();
    // ln(Q1 u + Q2 (1-u)) = lq1 + ln(u + (1-u) Q2/Q1)
    let target = lq1 + log_add_exp(u.ln(), (1.0 - u).ln() + lq2 - lq1);
    inv_ln_upper_gamma_reg(s, target, c1, GAMMA_INV_TOL).min(c2)
}

fn sample_y_left(d: &SpineDensity, rng: &mut RngStream) -> Result<f64> {
    let x0 = d.spec.x0;
    for _ in 0..MAX_REJECTION_ROUNDS {
        let x = sample_x_left(d, rng);
        if rng.uniform() < (x - x0).exp() {
            return Ok(x);
        }
    }
    Err(BrwError::RejectionExhausted { what: "left-branch child displacement", rounds: MAX_REJECTION_ROUNDS })
}

/// `N(mu, sigma^2)` conditioned on `Z > lo`.
pub fn truncated_normal_above(mu: f64, sigma: f64, lo: f64, rng: &mut RngStream) -> f64 {
    let alpha = (lo - mu) / sigma;
    if alpha < 0.5 {
        loop {
            let z: f64 = StandardNormal.sample(rng);
            if z > alpha {
                return mu + sigma * z;
            }
        }
    }
    // Exponential proposal with optimal rate (Robert 1995).
    let rate = 0.5 * (alpha + (alpha * alpha + 4.0).sqrt());
    loop {
        let e: f64 = Exp1.sample(rng);
        let z = alpha + e / rate;
        if rng.uniform() < (-0.5 * (z - rate).powi(2)).exp() {
            return mu + sigma * z;
        }
    }
}

/// `X` conditioned on `X < -zeta`, with `ln P(X < -zeta)`.
pub fn sample_x_conditioned_big_jump(
    model: &CalibratedModel,
    zeta: f64,
    rng: &mut RngStream,
) -> Result<(f64, f64)> {
    let d = model.require_density("conditioned big-jump sampling")?;
    check_pure_tail(d, zeta)?;
    Ok((sample_x_beyond(d, zeta, rng), d.ln_tail_prob(zeta)))
}

pub(crate) fn check_pure_tail(d: &SpineDensity, zeta: f64) -> Result<()> {
    if zeta < d.spec.x0.abs() {
        return Err(BrwError::domain(format!(
            "threshold {zeta} lies inside the mixed region; need zeta >= |x0| = {}",
            d.spec.x0.abs()
        )));
    }
    Ok(())
}

pub(crate) fn sample_x_beyond(d: &SpineDensity, zeta: f64, rng: &mut RngStream) -> f64 {
    let c = d.spec.lambda * zeta.powf(d.spec.b);
    let w = truncated_gamma_above(d.gamma_shape, c, rng);
    -(w / d.spec.lambda).powf(1.0 / d.spec.b)
}

/// `X` conditioned on `-t2 <= X < -t1`, both inside the pure tail.
pub fn sample_x_in_tail_interval(d: &SpineDensity, t1: f64, t2: f64, rng: &mut RngStream) -> f64 {
    let sp = &d.spec;
    let c1 = sp.lambda * t1.powf(sp.b);
    let c2 = sp.lambda * t2.powf(sp.b);
    let w = truncated_gamma_between(d.gamma_shape, c1, c2, rng);
    -(w / sp.lambda).powf(1.0 / sp.b)
}

/// Exact joint law of one toy brood: two children with independent steps.
pub fn toy_brood_pmf(law: &ToyLaw) -> Vec<([f64; 2], f64)> {
    let atoms = law.atoms();
    let mut out = Vec::new();
    for &(y1, p1) in &atoms {
        for &(y2, p2) in &atoms {
            out.push(([y1, y2], p1 * p2));
        }
    }
    out
}
