use rayon::prelude::*;
use stroke_core::experiments::RunExecutor;

/// Runs jobs on a dedicated Rayon pool. Results come back in index order, so
/// output never depends on scheduling.
#[derive(Debug)]
pub struct RayonExecutor {
    pool: rayon::ThreadPool,
}

impl RayonExecutor {
    pub fn new(threads: usize) -> Result<Self, rayon::ThreadPoolBuildError> {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads.max(1)).build()?;
        Ok(Self { pool })
    }

    pub fn threads(&self) -> usize {
        self.pool.current_num_threads()
    }
}

impl RunExecutor for RayonExecutor {
    fn map<T: Send>(&self, n: usize, job: &(dyn Fn(usize) -> T + Sync)) -> Vec<T> {
        if self.threads() == 1 {
            return (0..n).map(job).collect();
        }
        self.pool.install(|| (0..n).into_par_iter().map(job).collect())
    }
}
