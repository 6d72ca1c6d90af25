use gma_core::trainer::FoldExecutor;
use rayon::prelude::*;

use crate::error::{GmaError, Result};

/// Runs folds on a dedicated rayon pool. Each fold draws from its own
/// random stream, so results do not depend on the number of threads.
pub struct Parallel {
    pool: rayon::ThreadPool,
}

impl Parallel {
    pub fn new(jobs: usize) -> Result<Self> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| GmaError::Usage(format!("thread pool: {e}")))?;
        Ok(Parallel { pool })
    }
}

impl FoldExecutor for Parallel {
    fn run<T, F>(&self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync,
    {
        self.pool.install(|| {
            let f = &f;
            (0..n).into_par_iter().map(f).collect()
        })
    }
}
