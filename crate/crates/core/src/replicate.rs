//! Independent replicates with per-replicate seeds.
//!
//! Replicate `i` of master seed `m` always receives [`derive_seed`]`(m, i)`,
//! so results are identical whether replicates run on one thread or many,
//! and are returned in replicate order either way.

use crate::rng::derive_seed;

pub fn replicate_seeds(master_seed: u64, count: usize) -> Vec<u64> {
    (0..count as u64).map(|i| derive_seed(master_seed, i)).collect()
}

/// Runs `f(index, seed)` for every replicate on the calling thread.
pub fn run_replicates_seq<T, F>(master_seed: u64, count: usize, f: F) -> Vec<T>
where
    F: Fn(usize, u64) -> T,
{
    replicate_seeds(master_seed, count)
        .into_iter()
        .enumerate()
        .map(|(i, s)| f(i, s))
        .collect()
}

/// Runs `f(index, seed)` for every replicate on a rayon pool. `jobs` bounds
/// the worker count; `None` uses the global pool.
#[cfg(feature = "parallel")]
pub fn run_replicates_par<T, F>(master_seed: u64, count: usize, jobs: Option<usize>, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize, u64) -> T + Sync + Send,
{
    use rayon::prelude::*;

    let seeds = replicate_seeds(master_seed, count);
    let work = || seeds.par_iter().enumerate().map(|(i, &s)| f(i, s)).collect();
    match jobs {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .expect("thread pool with a positive thread count")
            .install(work),
        None => work(),
    }
}

/// Parallel when the `parallel` feature is enabled, sequential otherwise.
pub fn run_replicates<T, F>(master_seed: u64, count: usize, jobs: Option<usize>, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize, u64) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        if jobs != Some(1) {
            return run_replicates_par(master_seed, count, jobs, f);
        }
    }
    let _ = jobs;
    run_replicates_seq(master_seed, count, f)
}
