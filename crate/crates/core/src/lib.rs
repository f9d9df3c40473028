//! Monte Carlo laboratory for branching random walks whose spine step has a
//! stretched-exponential left tail.
//!
//! Modules, bottom-up: [`model`] (law family, calibration, schedule),
//! [`samplers`], [`rwalk`] (the spine random walk), [`brw`] (tree engine
//! under `P` and under the size-biased measure), [`limits`] (limit constants
//! and the decorated Poisson limit process) and [`report`] (tabular output).

pub mod brw;
pub mod error;
pub mod limits;
pub mod measure;
pub mod model;
pub mod par;
pub mod quad;
pub mod report;
pub mod rng;
pub mod rwalk;
pub mod samplers;
pub mod special;
pub mod stats;

pub use error::{BrwError, Result};
pub use measure::PointMeasure;
pub use model::{calibrate, discrete_toy_model, CalibratedModel, ModelSpec, OffspringLaw, Schedule};
pub use rng::RngStream;
pub use stats::EstimateWithError;
