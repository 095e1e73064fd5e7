//! Order-preserving data parallelism. With the `parallel` feature off every
//! helper runs sequentially and produces the same output.

/// `(0..len).map(f)` collected in index order, in parallel when available.
pub fn map_indexed<T, F>(len: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..len).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        map_indexed_sequential(len, f)
    }
}

pub fn map_indexed_sequential<T, F>(len: usize, f: F) -> Vec<T>
where
    F: Fn(usize) -> T,
{
    (0..len).map(f).collect()
}

/// Run `op` on a pool with `workers` threads (`None` keeps the global pool).
pub fn with_workers<R: Send>(workers: Option<usize>, op: impl FnOnce() -> R + Send) -> R {
    #[cfg(feature = "parallel")]
    if let Some(w) = workers {
        match rayon::ThreadPoolBuilder::new().num_threads(w.max(1)).build() {
            Ok(pool) => return pool.install(op),
            Err(_) => return op(),
        }
    }
    #[cfg(not(feature = "parallel"))]
    let _ = workers;
    op()
}

pub fn parallel_enabled() -> bool {
    cfg!(feature = "parallel")
}
