use serde::{Deserialize, Serialize};

use super::engine::{grow, Generation, GrowConfig, Measure, RayWindow, DEFAULT_POP_CAP};
use crate::error::Result;
use crate::measure::PointMeasure;
use crate::model::{schedule, CalibratedModel};
use crate::rng::RngStream;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TreeMode {
    FullGenealogy,
    FrontierOnly,
}

/// Statistics to compute per generation, fixed at launch.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StatsRequest {
    /// Record `V(u) - alpha_n` atoms for `n >= 1`.
    pub extremal: bool,
    pub ray_windows: Vec<RayWindow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationSummary {
    pub n: usize,
    /// `M_n`; `+inf` after extinction.
    pub min_position: f64,
    /// `W_n`.
    pub w: f64,
    pub pop: usize,
    pub extremal: Option<PointMeasure>,
    /// Ray statistic of the first window ending at this generation.
    pub ray_stat: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Node {
    pub parent: Option<u32>,
    pub depth: usize,
    pub position: f64,
}

/// Genealogy stored generation by generation.
#[derive(Debug, Clone, PartialEq)]
pub struct Tree {
    pub mode: TreeMode,
    /// Depth of `generations[0]` (0 unless frontier-only).
    pub first_depth: usize,
    pub generations: Vec<Vec<f64>>,
    pub parents: Vec<Vec<u32>>,
}

impl Tree {
    fn new(mode: TreeMode) -> Self {
        Tree { mode, first_depth: 0, generations: Vec::new(), parents: Vec::new() }
    }

    fn record(&mut self, g: &Generation) {
        match self.mode {
            TreeMode::FullGenealogy => {
                self.generations.push(g.positions.to_vec());
                self.parents.push(g.parents.to_vec());
            }
            TreeMode::FrontierOnly => {
                self.first_depth = g.n;
                self.generations = vec![g.positions.to_vec()];
                self.parents = vec![g.parents.to_vec()];
            }
        }
    }

    pub fn depth(&self) -> usize {
        self.first_depth + self.generations.len().saturating_sub(1)
    }

    pub fn generation(&self, n: usize) -> Option<&[f64]> {
        n.checked_sub(self.first_depth).and_then(|i| self.generations.get(i)).map(|v| v.as_slice())
    }

    pub fn node(&self, depth: usize, idx: usize) -> Option<Node> {
        let i = depth.checked_sub(self.first_depth)?;
        let position = *self.generations.get(i)?.get(idx)?;
        let parent = if depth == 0 { None } else { self.parents[i].get(idx).copied() };
        Some(Node { parent, depth, position })
    }

    pub fn node_count(&self) -> usize {
        self.generations.iter().map(|g| g.len()).sum()
    }

    /// Positions `V(u_1), ..., V(u_n)` along the ancestry of node `(depth, idx)`.
    /// Requires the full genealogy.
    pub fn path(&self, depth: usize, idx: usize) -> Vec<f64> {
        assert_eq!(self.mode, TreeMode::FullGenealogy, "paths need the full genealogy");
        let mut out = vec![0.0; depth];
        let mut i = idx;
        for d in (1..=depth).rev() {
            out[d - 1] = self.generations[d][i];
            i = self.parents[d][i] as usize;
        }
        out
    }

    /// `W_n` recomputed from the stored nodes.
    pub fn w(&self, n: usize) -> Option<f64> {
        self.generation(n).map(|g| g.iter().map(|&v| (-v).exp()).sum())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TreeRun {
    pub summaries: Vec<GenerationSummary>,
    pub tree: Tree,
}

pub(crate) fn summarize(model: &CalibratedModel, req: &StatsRequest, g: &Generation) -> Result<GenerationSummary> {
    let extremal = if req.extremal && g.n >= 1 && model.density().is_some() {
        let alpha = schedule(model, g.n)?.alpha_n;
        Some(PointMeasure::new(g.positions.iter().map(|v| v - alpha).collect()))
    } else {
        None
    };
    let ray_stat = g.windows.iter().position(|w| w.n == g.n).map(|k| g.ray_stat(k));
    Ok(GenerationSummary { n: g.n, min_position: g.min(), w: g.w(), pop: g.pop(), extremal, ray_stat })
}

fn run(
    model: &CalibratedModel,
    n: usize,
    measure: Measure,
    mode: TreeMode,
    req: &StatsRequest,
    rng: &mut RngStream,
    pop_cap: usize,
) -> Result<(TreeRun, Vec<Option<usize>>)> {
    let mut summaries = Vec::with_capacity(n + 1);
    let mut tree = Tree::new(mode);
    let mut spine = Vec::new();
    let cfg = GrowConfig::new(n, measure).pop_cap(pop_cap).windows(&req.ray_windows);
    grow(model, cfg, rng, &mut |g: &Generation| {
        summaries.push(summarize(model, req, g)?);
        tree.record(g);
        spine.push(g.spine);
        Ok(())
    })?;
    Ok((TreeRun { summaries, tree }, spine))
}

/// Simulate a tree under P for `n` generations.
pub fn simulate_tree(
    model: &CalibratedModel,
    n: usize,
    mode: TreeMode,
    req: &StatsRequest,
    rng: &mut RngStream,
    pop_cap: usize,
) -> Result<TreeRun> {
    Ok(run(model, n, Measure::P, mode, req, rng, pop_cap)?.0)
}

/// Tree grown under the size-biased measure, with its spine.
#[derive(Debug, Clone, PartialEq)]
pub struct SpineRun {
    pub summaries: Vec<GenerationSummary>,
    pub tree: Tree,
    /// Index of `w_k` within generation `k`.
    pub spine_nodes: Vec<usize>,
    /// `V(w_0), ..., V(w_n)`.
    pub spine_positions: Vec<f64>,
}

pub fn simulate_spine_tree(model: &CalibratedModel, n: usize, rng: &mut RngStream, pop_cap: usize) -> Result<SpineRun> {
    let (run, spine) = run(model, n, Measure::Q, TreeMode::FullGenealogy, &StatsRequest::default(), rng, pop_cap)?;
    let spine_nodes: Vec<usize> = spine.into_iter().map(|s| s.expect("spine survives under Q")).collect();
    let spine_positions = spine_nodes.iter().enumerate().map(|(k, &i)| run.tree.generations[k][i]).collect();
    Ok(SpineRun { summaries: run.summaries, tree: run.tree, spine_nodes, spine_positions })
}

/// `simulate_tree` with the default population cap.
pub fn simulate_tree_default(model: &CalibratedModel, n: usize, mode: TreeMode, rng: &mut RngStream) -> Result<TreeRun> {
    simulate_tree(model, n, mode, &StatsRequest::default(), rng, DEFAULT_POP_CAP)
}
