use serde::{Deserialize, Serialize};

use crate::error::{BrwError, Result};
use crate::model::CalibratedModel;
use crate::rng::RngStream;
use crate::samplers::Sampler;

/// Default cap on node-generations per tree.
pub const DEFAULT_POP_CAP: usize = 50_000_000;

/// Which measure the tree is grown under.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Measure {
    /// Plain branching random walk.
    P,
    /// Size-biased tree: one spine particle per generation with a
    /// size-biased brood, the rest as under P.
    Q,
}

/// Window `[ceil(eps n), n]` of the running ray maximum `V(u_k) / k^{1/(2-b)}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RayWindow {
    pub n: usize,
    pub eps: f64,
}

impl RayWindow {
    pub fn start(&self) -> usize {
        ((self.eps * self.n as f64).ceil() as usize).max(1)
    }

    fn contains(&self, k: usize) -> bool {
        k >= self.start() && k <= self.n
    }
}

/// One generation as seen by a visitor.
pub struct Generation<'a> {
    pub n: usize,
    pub positions: &'a [f64],
    /// Parent index into the previous generation; empty at generation 0.
    pub parents: &'a [u32],
    /// Running ray maxima, `windows.len()` entries per particle.
    pub ray: &'a [f64],
    pub windows: &'a [RayWindow],
    pub spine: Option<usize>,
}

impl Generation<'_> {
    pub fn pop(&self) -> usize {
        self.positions.len()
    }

    /// `M_n`, `+inf` on extinction.
    pub fn min(&self) -> f64 {
        self.positions.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// `W_n`, summed in particle order.
    pub fn w(&self) -> f64 {
        self.positions.iter().map(|&v| (-v).exp()).sum()
    }

    /// Minimum over particles of the running maximum of window `k`.
    pub fn ray_stat(&self, k: usize) -> f64 {
        let stride = self.windows.len();
        (0..self.pop()).map(|i| self.ray[i * stride + k]).fold(f64::INFINITY, f64::min)
    }
}

pub trait Visitor {
    fn visit(&mut self, g: &Generation) -> Result<()>;
}

impl<F: FnMut(&Generation) -> Result<()>> Visitor for F {
    fn visit(&mut self, g: &Generation) -> Result<()> {
        self(g)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct GrowConfig<'a> {
    pub n: usize,
    pub measure: Measure,
    pub pop_cap: usize,
    pub windows: &'a [RayWindow],
}

impl<'a> GrowConfig<'a> {
    pub fn new(n: usize, measure: Measure) -> Self {
        GrowConfig { n, measure, pop_cap: DEFAULT_POP_CAP, windows: &[] }
    }

    pub fn pop_cap(mut self, cap: usize) -> Self {
        self.pop_cap = cap;
        self
    }

    pub fn windows(mut self, windows: &'a [RayWindow]) -> Self {
        self.windows = windows;
        self
    }
}

pub(crate) fn ray_exponent(model: &CalibratedModel) -> Result<f64> {
    let d = model.require_density("the ray statistic")?;
    Ok(1.0 / (2.0 - d.spec.b))
}

/// Grow one tree generation by generation, handing each generation (0
/// through `cfg.n`) to `visitor`. Random draws are consumed parent by parent
/// in generation order, so a shorter run is an exact prefix of a longer one.
pub fn grow<V: Visitor + ?Sized>(
    model: &CalibratedModel,
    cfg: GrowConfig,
    rng: &mut RngStream,
    visitor: &mut V,
) -> Result<()> {
    let sampler = Sampler::new(model);
    let windows = cfg.windows;
    let k = windows.len();
    let exponent = if k > 0 { ray_exponent(model)? } else { 0.0 };
    for w in windows {
        if !(w.eps > 0.0 && w.eps < 1.0) {
            return Err(BrwError::domain("ray window eps must lie in (0, 1)"));
        }
    }

    let mut pos = vec![0.0];
    let mut par: Vec<u32> = Vec::new();
    let mut ray = vec![f64::NEG_INFINITY; k];
    let mut spine = match cfg.measure {
        Measure::P => None,
        Measure::Q => Some(0),
    };
    let mut total = 1usize;
    visitor.visit(&Generation { n: 0, positions: &pos, parents: &par, ray: &ray, windows, spine })?;

    let mut npos: Vec<f64> = Vec::new();
    let mut npar: Vec<u32> = Vec::new();
    let mut nray: Vec<f64> = Vec::new();
    let mut brood: Vec<f64> = Vec::new();
    let mut active = vec![false; k];
    for gen in 1..=cfg.n {
        npos.clear();
        npar.clear();
        nray.clear();
        let scale = if k > 0 { (gen as f64).powf(exponent) } else { 1.0 };
        for (w, a) in windows.iter().zip(active.iter_mut()) {
            *a = w.contains(gen);
        }
        let mut nspine = None;
        for (i, &x) in pos.iter().enumerate() {
            brood.clear();
            let is_spine = spine == Some(i);
            let sidx = sampler.fill_brood(rng, is_spine, &mut brood)?;
            for (c, &y) in brood.iter().enumerate() {
                if is_spine && sidx == Some(c) {
                    nspine = Some(npos.len());
                }
                let v = x + y;
                npos.push(v);
                npar.push(i as u32);
                for w in 0..k {
                    let r = ray[i * k + w];
                    nray.push(if active[w] { r.max(v / scale) } else { r });
                }
            }
        }
        total += npos.len();
        if total > cfg.pop_cap {
            return Err(BrwError::Capacity { generation: gen, population: total, cap: cfg.pop_cap });
        }
        std::mem::swap(&mut pos, &mut npos);
        std::mem::swap(&mut par, &mut npar);
        std::mem::swap(&mut ray, &mut nray);
        spine = nspine;
        visitor.visit(&Generation { n: gen, positions: &pos, parents: &par, ray: &ray, windows, spine })?;
    }
    Ok(())
}
