//! Replicate-parallel execution on a bounded worker pool.

use rayon::prelude::*;

use crate::error::{Error, Result};

/// Runs `job(r)` for `r = 0..reps` on `workers` threads (0 means one per
/// available core) and returns the results in replicate order.
///
/// Scheduling never affects the output: each replicate derives its
/// randomness from its own index. The first failing replicate aborts the
/// whole run.
pub fn map_replicates<T, F>(reps: usize, workers: usize, job: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64) -> Result<T> + Sync + Send,
{
    if workers == 1 {
        return (0..reps as u64).map(job).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::InvalidArgument(format!("cannot build worker pool: {e}")))?;
    pool.install(|| (0..reps as u64).into_par_iter().map(&job).collect())
}
