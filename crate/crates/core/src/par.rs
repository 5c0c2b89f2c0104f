//! Replica-parallel execution.
//!
//! Monte Carlo replicas are independent jobs: replica `i` derives its own
//! RNG stream from `(master seed, i)` and never touches shared mutable
//! state. `replica_map` therefore returns the same `Vec` for any worker
//! count, and downstream statistics reduce over it in replica order.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Independent RNG stream for one replica of a seeded experiment.
///
/// ChaCha streams are cryptographically independent, so `(seed, 0)`,
/// `(seed, 1)`, ... can run concurrently without coordination.
pub fn replica_rng(master_seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(stream);
    rng
}

/// Evaluate `job(0..count)` across the rayon pool, collecting in index order.
#[cfg(feature = "parallel")]
pub fn replica_map<T, F>(count: usize, job: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    use rayon::prelude::*;
    (0..count).into_par_iter().map(job).collect()
}

/// Sequential fallback when the `parallel` feature is disabled.
#[cfg(not(feature = "parallel"))]
pub fn replica_map<T, F>(count: usize, job: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    replica_map_seq(count, job)
}

/// Always-sequential driver, kept available for benchmarks against the
/// parallel path.
pub fn replica_map_seq<T, F>(count: usize, job: F) -> Vec<T>
where
    F: Fn(usize) -> T,
{
    (0..count).map(job).collect()
}

/// Run `f` on a dedicated pool with `workers` threads.
#[cfg(feature = "parallel")]
pub fn with_workers<T, F>(workers: usize, f: F) -> T
where
    T: Send,
    F: FnOnce() -> T + Send,
{
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .expect("failed to build worker pool")
        .install(f)
}

/// Without rayon the worker count is ignored.
#[cfg(not(feature = "parallel"))]
pub fn with_workers<T, F>(_workers: usize, f: F) -> T
where
    F: FnOnce() -> T,
{
    f()
}
