//! Branching random walk under P and under the size-biased measure Q.

pub mod checks;
pub mod engine;
pub mod exact;
pub mod tree;

pub use checks::*;
pub use engine::{grow, Generation, GrowConfig, Measure, RayWindow, Visitor, DEFAULT_POP_CAP};
pub use exact::{enumerate_toy_trees, toy_w1_law, toy_walk_paths, ToyTree};
pub use tree::{
    simulate_spine_tree, simulate_tree, simulate_tree_default, GenerationSummary, Node, SpineRun, StatsRequest, Tree,
    TreeMode, TreeRun,
};
