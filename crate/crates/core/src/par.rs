//! Data-parallel replica maps.
//!
//! With the `parallel` feature (default) replicas run on the rayon pool;
//! without it they run in order on the calling thread. Both paths return
//! results in replica order, so any fold over the output is deterministic.

/// Independent RNG streams per Monte Carlo campaign; fixed so results do not
/// depend on the worker count.
pub const REPLICA_STREAMS: usize = 64;

/// Maps `f` over `0..n` using the configured backend.
pub fn map_replicas<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        map_replicas_parallel(n, f)
    }
    #[cfg(not(feature = "parallel"))]
    {
        map_replicas_sequential(n, f)
    }
}

pub fn map_replicas_sequential<T, F>(n: usize, f: F) -> Vec<T>
where
    F: Fn(usize) -> T,
{
    (0..n).map(f).collect()
}

#[cfg(feature = "parallel")]
pub fn map_replicas_parallel<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    use rayon::prelude::*;
    (0..n).into_par_iter().map(f).collect()
}

/// Splits `total` work items into `chunks` nearly equal batch sizes.
pub fn batch_sizes(total: usize, chunks: usize) -> Vec<usize> {
    let chunks = chunks.max(1).min(total.max(1));
    let base = total / chunks;
    let extra = total % chunks;
    (0..chunks).map(|i| base + usize::from(i < extra)).collect()
}

/// Configures the global pool size. Returns false if a pool already exists
/// or the crate was built without parallel support.
pub fn set_thread_cap(threads: usize) -> bool {
    #[cfg(feature = "parallel")]
    {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads.max(1))
            .build_global()
            .is_ok()
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = threads;
        false
    }
}
