//! Layer-level parallelism.
//!
//! Sweeps, checksum accumulation, detection and correction all operate on
//! independent 2D layers: each layer writes only its own output buffer and
//! checksum bins and reads only iteration-t data, so results are identical
//! for any parallelism degree.

/// Execution context for per-layer work.
pub enum Parallelism {
    Sequential,
    #[cfg(feature = "parallel")]
    Pool(rayon::ThreadPool),
}

impl Parallelism {
    /// `threads == 1` runs sequentially; `threads == 0` uses all cores.
    pub fn new(threads: usize) -> Self {
        #[cfg(feature = "parallel")]
        {
            if threads == 1 {
                return Parallelism::Sequential;
            }
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .expect("failed to build thread pool");
            Parallelism::Pool(pool)
        }
        #[cfg(not(feature = "parallel"))]
        {
            let _ = threads;
            Parallelism::Sequential
        }
    }

    pub fn sequential() -> Self {
        Parallelism::Sequential
    }

    /// Applies `f` to every element of `items`, collecting the results in
    /// order.
    pub fn map_mut<T, R, F>(&self, items: &mut [T], f: F) -> Vec<R>
    where
        T: Send,
        R: Send,
        F: Fn(usize, &mut T) -> R + Sync,
    {
        match self {
            Parallelism::Sequential => items
                .iter_mut()
                .enumerate()
                .map(|(i, item)| f(i, item))
                .collect(),
            #[cfg(feature = "parallel")]
            Parallelism::Pool(pool) => {
                use rayon::prelude::*;
                pool.install(|| {
                    items
                        .par_iter_mut()
                        .enumerate()
                        .map(|(i, item)| f(i, item))
                        .collect()
                })
            }
        }
    }
}

impl std::fmt::Debug for Parallelism {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Parallelism::Sequential => write!(f, "Sequential"),
            #[cfg(feature = "parallel")]
            Parallelism::Pool(pool) => write!(f, "Pool({})", pool.current_num_threads()),
        }
    }
}
