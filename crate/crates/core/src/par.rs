//! Replicate-parallel execution with ordered collection.

use rayon::prelude::*;

/// Evaluate `f(rep)` for `rep in 0..reps` on `workers` threads and return the
/// results in replicate order. The output never depends on `workers`.
pub fn map_replicates<T, F>(workers: usize, reps: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    let workers = workers.max(1);
    if workers == 1 {
        return (0..reps).map(f).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .expect("thread pool");
    pool.install(|| (0..reps).into_par_iter().map(&f).collect())
}

/// Worker count to use when none is configured.
pub fn default_workers() -> usize {
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}

/// Like [`map_replicates`], handing each replicate its own stream
/// `hash64(salt, rep, purpose)` under `root_seed`.
pub fn run_replicates<T, F>(workers: usize, reps: usize, root_seed: u64, salt: u64, purpose: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize, &mut crate::rng::RngStream) -> T + Sync + Send,
{
    map_replicates(workers, reps, |rep| {
        let mut rng = crate::rng::RngStream::for_replicate(root_seed, salt, rep as u64, purpose);
        f(rep, &mut rng)
    })
}

/// Replicate count, root seed, worker count, stream salt and per-tree
/// population cap of one Monte Carlo job.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct McConfig {
    pub reps: usize,
    pub seed: u64,
    pub workers: usize,
    pub salt: u64,
    pub pop_cap: usize,
}

impl McConfig {
    pub fn new(reps: usize, seed: u64) -> Self {
        McConfig { reps, seed, workers: 1, salt: 0, pop_cap: crate::brw::DEFAULT_POP_CAP }
    }

    pub fn pop_cap(mut self, cap: usize) -> Self {
        self.pop_cap = cap.max(1);
        self
    }

    pub fn workers(mut self, workers: usize) -> Self {
        self.workers = workers.max(1);
        self
    }

    pub fn salt(mut self, salt: u64) -> Self {
        self.salt = salt;
        self
    }

    pub fn reps(mut self, reps: usize) -> Self {
        self.reps = reps;
        self
    }

    pub fn run<T, F>(&self, purpose: u64, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize, &mut crate::rng::RngStream) -> T + Sync + Send,
    {
        run_replicates(self.workers, self.reps, self.seed, self.salt, purpose, f)
    }
}
