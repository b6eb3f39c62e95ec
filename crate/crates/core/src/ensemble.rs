//! Order-preserving parallel ensembles. Results are collected in path
//! order and every reduction runs sequentially afterwards, so outputs do
//! not depend on the number of worker threads.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::rng::stream_seed;

/// Runs `f(path_index, path_seed)` for every path in parallel. A
/// divergence is tagged with the seed of the path it happened on.
pub fn par_paths<T, F>(n: usize, seed: u64, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize, u64) -> Result<T> + Sync + Send,
{
    (0..n)
        .into_par_iter()
        .map(|i| {
            let s = stream_seed(seed, i as u64);
            f(i, s).map_err(|e| match e {
                Error::Divergence { step, norm, seed: None } => Error::Divergence { step, norm, seed: Some(s) },
                other => other,
            })
        })
        .collect()
}

/// Runs `f` inside a dedicated pool with `workers` threads (0 = rayon default).
pub fn with_workers<R: Send>(workers: usize, f: impl FnOnce() -> R + Send) -> R {
    if workers == 0 {
        return f();
    }
    match rayon::ThreadPoolBuilder::new().num_threads(workers).build() {
        Ok(pool) => pool.install(f),
        Err(_) => f(),
    }
}
