//! Experiment configuration files.

use std::path::{Path, PathBuf};

use brwlab::brw::{RayWindow, DEFAULT_POP_CAP};
use brwlab::limits::TestFunction;
use brwlab::model::{calibrate, discrete_toy_model, preset, CalibratedModel, ModelSpec};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// A model given by name (fixture file, preset or `discrete-toy`) or inline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ModelRef {
    Named(String),
    Inline(ModelSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrateConfig {
    pub model: ModelRef,
    /// Fixture name; defaults to the model's own name.
    #[serde(default)]
    pub name: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub name: String,
    pub model: ModelRef,
    #[serde(default = "default_reps")]
    pub reps: usize,
    /// Used when `--seed` is not given.
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default = "default_pop_cap")]
    pub pop_cap: usize,
    /// Soft wall-clock budget; a run past it is flagged in the manifest.
    #[serde(default)]
    pub wall_budget_secs: Option<f64>,
    pub experiment: Experiment,
}

fn default_reps() -> usize {
    1000
}

fn default_pop_cap() -> usize {
    DEFAULT_POP_CAP
}

fn default_n_grid() -> Vec<usize> {
    vec![50, 100, 200]
}

fn default_x_grid() -> Vec<f64> {
    (-4..=6).map(f64::from).collect()
}

fn default_j_max() -> usize {
    150
}

fn default_cstar_reps() -> usize {
    1000
}

fn default_w_pool_n() -> usize {
    200
}

fn default_tail_x() -> Vec<f64> {
    vec![2.0, 4.0, 6.0]
}

fn default_tail_slack() -> f64 {
    20.0
}

fn default_battery() -> Vec<TestFunction> {
    TestFunction::default_battery()
}

fn default_n_cm() -> usize {
    8
}

fn default_n_ks() -> usize {
    10
}

fn default_ks_level() -> f64 {
    1e-3
}

fn default_compare_j() -> Vec<usize> {
    vec![5, 20]
}

fn default_ray_grid() -> Vec<usize> {
    vec![100, 200]
}

fn default_eps() -> f64 {
    0.5
}

fn default_lemma_n() -> usize {
    100
}

fn default_mgf_grid() -> Vec<usize> {
    vec![100, 200, 400]
}

fn default_lemma_x() -> Vec<f64> {
    vec![0.0, 0.5, 1.0, 1.5, 2.0, 3.0]
}

fn default_gibbs_n() -> Vec<usize> {
    vec![1, 2]
}

fn default_bins() -> usize {
    10
}

/// Settings shared by the kinds that compare against limit objects.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LimitInputs {
    #[serde(default = "default_j_max")]
    pub j_max: usize,
    #[serde(default = "default_cstar_reps")]
    pub cstar_reps: usize,
    /// Defaults to the run's `reps`.
    #[serde(default)]
    pub w_pool_reps: Option<usize>,
    #[serde(default = "default_w_pool_n")]
    pub w_pool_n: usize,
}

impl Default for LimitInputs {
    fn default() -> Self {
        LimitInputs { j_max: default_j_max(), cstar_reps: default_cstar_reps(), w_pool_reps: None, w_pool_n: default_w_pool_n() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OneJumpParams {
    pub n: usize,
    #[serde(default)]
    pub p: Option<usize>,
    #[serde(default)]
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Experiment {
    Simulate {
        n: usize,
        /// Generations whose extremal atoms go to `atoms.csv`.
        #[serde(default)]
        atoms_at: Vec<usize>,
        #[serde(default)]
        ray_windows: Vec<RayWindow>,
    },
    MinimumLaw {
        #[serde(default = "default_n_grid")]
        n_grid: Vec<usize>,
        #[serde(default = "default_x_grid")]
        x_grid: Vec<f64>,
        #[serde(default = "default_tail_x")]
        tail_x: Vec<f64>,
        #[serde(default = "default_tail_slack")]
        tail_slack: f64,
        #[serde(default = "default_j_max")]
        j_max: usize,
        #[serde(default = "default_cstar_reps")]
        cstar_reps: usize,
        #[serde(default)]
        w_pool_reps: Option<usize>,
        #[serde(default = "default_w_pool_n")]
        w_pool_n: usize,
    },
    Extremal {
        #[serde(default = "default_n_grid")]
        n_grid: Vec<usize>,
        #[serde(default = "default_battery")]
        battery: Vec<TestFunction>,
        #[serde(default = "default_j_max")]
        j_max: usize,
        #[serde(default = "default_cstar_reps")]
        cstar_reps: usize,
        #[serde(default)]
        w_pool_reps: Option<usize>,
        #[serde(default = "default_w_pool_n")]
        w_pool_n: usize,
    },
    Joint {
        n: usize,
        x_grid: Vec<f64>,
        #[serde(default = "default_battery")]
        battery: Vec<TestFunction>,
        #[serde(default = "default_j_max")]
        j_max: usize,
        #[serde(default = "default_cstar_reps")]
        cstar_reps: usize,
        #[serde(default)]
        w_pool_reps: Option<usize>,
        #[serde(default = "default_w_pool_n")]
        w_pool_n: usize,
    },
    SpineCheck {
        #[serde(default = "default_n_cm")]
        n_cm: usize,
        #[serde(default = "default_n_ks")]
        n_ks: usize,
        #[serde(default = "default_ks_level")]
        ks_level: f64,
    },
    ManyToOne {
        n: usize,
        /// Generations of the Gibbs check (toy: exact cells; otherwise `n = 1` binned).
        #[serde(default = "default_gibbs_n")]
        gibbs_n: Vec<usize>,
        #[serde(default = "default_bins")]
        bins: usize,
    },
    RwLemmas {
        #[serde(default = "default_lemma_n")]
        n: usize,
        #[serde(default = "default_mgf_grid")]
        mgf_n_grid: Vec<usize>,
        #[serde(default = "default_lemma_x")]
        x_grid: Vec<f64>,
        #[serde(default)]
        y_grid: Vec<f64>,
        /// Two-jump threshold; defaults to `max(zeta_n, |x0|)`.
        #[serde(default)]
        two_jump_threshold: Option<f64>,
        #[serde(default)]
        one_jump: Option<OneJumpParams>,
    },
    Cstar {
        #[serde(default = "default_j_max")]
        j_max: usize,
        #[serde(default = "default_compare_j")]
        compare_j: Vec<usize>,
        #[serde(default = "default_battery")]
        battery: Vec<TestFunction>,
    },
    LimitProcess {
        window: [f64; 2],
        #[serde(default = "default_battery")]
        battery: Vec<TestFunction>,
        #[serde(default = "default_j_max")]
        j_max: usize,
        #[serde(default = "default_cstar_reps")]
        cstar_reps: usize,
        #[serde(default)]
        w_pool_reps: Option<usize>,
        #[serde(default = "default_w_pool_n")]
        w_pool_n: usize,
    },
    RayExponent {
        #[serde(default = "default_ray_grid")]
        n_grid: Vec<usize>,
        #[serde(default = "default_eps")]
        eps: f64,
    },
}

impl Experiment {
    pub fn kind(&self) -> &'static str {
        match self {
            Experiment::Simulate { .. } => "simulate",
            Experiment::MinimumLaw { .. } => "minimum-law",
            Experiment::Extremal { .. } => "extremal",
            Experiment::Joint { .. } => "joint",
            Experiment::SpineCheck { .. } => "spine-check",
            Experiment::ManyToOne { .. } => "many-to-one",
            Experiment::RwLemmas { .. } => "rw-lemmas",
            Experiment::Cstar { .. } => "cstar",
            Experiment::LimitProcess { .. } => "limit-process",
            Experiment::RayExponent { .. } => "ray-exponent",
        }
    }

    /// Whether the kind makes sense for the two-point toy.
    pub fn allows_toy(&self) -> bool {
        matches!(self, Experiment::Simulate { .. } | Experiment::ManyToOne { .. } | Experiment::SpineCheck { .. })
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Config(m));
        if self.name.is_empty() || !self.name.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_') {
            return bad(format!("run name {:?} must be non-empty [A-Za-z0-9_-]", self.name));
        }
        if self.reps == 0 {
            return bad("reps must be positive".into());
        }
        if self.pop_cap == 0 {
            return bad("pop_cap must be positive".into());
        }
        let grid_ok = |g: &[usize]| !g.is_empty() && g.windows(2).all(|w| w[0] < w[1]) && g[0] >= 1;
        match &self.experiment {
            Experiment::MinimumLaw { n_grid, x_grid, .. } => {
                if !grid_ok(n_grid) || x_grid.is_empty() {
                    return bad("n_grid must be increasing from 1 and x_grid non-empty".into());
                }
            }
            Experiment::Extremal { n_grid, battery, .. } => {
                if !grid_ok(n_grid) || battery.is_empty() {
                    return bad("n_grid must be increasing from 1 and the battery non-empty".into());
                }
            }
            Experiment::Joint { n, x_grid, battery, .. } => {
                if *n == 0 || x_grid.is_empty() || battery.is_empty() {
                    return bad("joint needs n >= 1, a non-empty x_grid and battery".into());
                }
            }
            Experiment::RayExponent { n_grid, eps } => {
                if !grid_ok(n_grid) || n_grid[0] < 10 || !(*eps > 0.0 && *eps < 1.0) {
                    return bad("ray-exponent needs an increasing n_grid from 10 and eps in (0, 1)".into());
                }
            }
            Experiment::LimitProcess { window, .. } => {
                if !(window[0].is_finite() && window[1].is_finite() && window[0] <= window[1]) {
                    return bad("window must be [lo, hi] with lo <= hi".into());
                }
            }
            Experiment::SpineCheck { n_cm, n_ks, ks_level } => {
                if *n_cm == 0 || *n_ks == 0 || !(*ks_level > 0.0 && *ks_level < 1.0) {
                    return bad("spine-check needs n_cm, n_ks >= 1 and ks_level in (0, 1)".into());
                }
            }
            _ => {}
        }
        match &self.experiment {
            Experiment::MinimumLaw { .. } | Experiment::Extremal { .. } | Experiment::Joint { .. } | Experiment::LimitProcess { .. } => {
                if let Some(li) = self.limit_inputs() {
                    if li.cstar_reps == 0 || li.w_pool_reps == Some(0) || li.j_max == 0 || li.w_pool_n == 0 {
                        return bad("cstar_reps, w_pool_reps, j_max and w_pool_n must be positive".into());
                    }
                }
            }
            _ => {}
        }
        if let Experiment::Extremal { battery, .. } | Experiment::Joint { battery, .. } | Experiment::Cstar { battery, .. } | Experiment::LimitProcess { battery, .. } =
            &self.experiment
        {
            for f in battery {
                f.validate().map_err(|e| CliError::Config(e.to_string()))?;
            }
        }
        Ok(())
    }

    pub fn limit_inputs(&self) -> Option<LimitInputs> {
        match &self.experiment {
            Experiment::MinimumLaw { j_max, cstar_reps, w_pool_reps, w_pool_n, .. }
            | Experiment::Extremal { j_max, cstar_reps, w_pool_reps, w_pool_n, .. }
            | Experiment::Joint { j_max, cstar_reps, w_pool_reps, w_pool_n, .. }
            | Experiment::LimitProcess { j_max, cstar_reps, w_pool_reps, w_pool_n, .. } => {
                Some(LimitInputs { j_max: *j_max, cstar_reps: *cstar_reps, w_pool_reps: *w_pool_reps, w_pool_n: *w_pool_n })
            }
            _ => None,
        }
    }
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

pub fn fixtures_dir() -> PathBuf {
    std::env::var_os("BRWLAB_FIXTURES_DIR").map(PathBuf::from).unwrap_or_else(|| PathBuf::from("fixtures/models"))
}

pub fn results_dir() -> PathBuf {
    std::env::var_os("BRWLAB_RESULTS_DIR").map(PathBuf::from).unwrap_or_else(|| PathBuf::from("results"))
}

/// Where a resolved model came from.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelSource {
    Fixture(String),
    Preset,
    Inline,
    Toy,
}

pub fn resolve_model(r: &ModelRef) -> Result<(CalibratedModel, ModelSource), CliError> {
    match r {
        ModelRef::Inline(spec) => Ok((calibrate(spec).map_err(CliError::from)?, ModelSource::Inline)),
        ModelRef::Named(name) if name == "discrete-toy" => Ok((discrete_toy_model(), ModelSource::Toy)),
        ModelRef::Named(name) => {
            let path = fixtures_dir().join(format!("{name}.json"));
            if path.exists() {
                let text = std::fs::read_to_string(&path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
                let model = CalibratedModel::from_json(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
                return Ok((model, ModelSource::Fixture(path.display().to_string())));
            }
            match preset(name) {
                Some(spec) => Ok((calibrate(&spec).map_err(CliError::from)?, ModelSource::Preset)),
                None => Err(CliError::Config(format!("no fixture {} and no preset named {name:?}", path.display()))),
            }
        }
    }
}

/// The spec a calibration config refers to.
pub fn spec_for_calibration(r: &ModelRef) -> Result<ModelSpec, CliError> {
    match r {
        ModelRef::Inline(spec) => Ok(spec.clone()),
        ModelRef::Named(name) => preset(name).ok_or_else(|| CliError::Config(format!("no preset named {name:?}"))),
    }
}
