//! Data-parallel execution with a sequential fallback.
//!
//! Every kernel routed through [`Execution::map`] returns results in input
//! order, and all reductions over them happen afterwards on one thread, so
//! output never depends on the worker count.

#[cfg(feature = "parallel")]
use std::sync::Arc;

#[derive(Clone)]
pub struct Execution {
    #[cfg(feature = "parallel")]
    pool: Option<Arc<rayon::ThreadPool>>,
    workers: usize,
}

impl std::fmt::Debug for Execution {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Execution")
            .field("workers", &self.workers)
            .finish()
    }
}

impl Default for Execution {
    fn default() -> Self {
        Execution::with_workers(std::thread::available_parallelism().map_or(1, |n| n.get()))
    }
}

impl Execution {
    pub fn sequential() -> Self {
        Execution {
            #[cfg(feature = "parallel")]
            pool: None,
            workers: 1,
        }
    }

    /// Uses a dedicated pool of `workers` threads. Without the `parallel`
    /// feature, or with `workers <= 1`, runs on the calling thread.
    pub fn with_workers(workers: usize) -> Self {
        #[cfg(feature = "parallel")]
        if workers > 1 {
            if let Ok(pool) = rayon::ThreadPoolBuilder::new().num_threads(workers).build() {
                return Execution {
                    pool: Some(Arc::new(pool)),
                    workers,
                };
            }
        }
        let _ = workers;
        Execution::sequential()
    }

    pub fn workers(&self) -> usize {
        self.workers
    }

    pub fn is_parallel(&self) -> bool {
        self.workers > 1
    }

    /// Applies `f` to every item; results keep input order.
    pub fn map<T, U, F>(&self, items: &[T], f: F) -> Vec<U>
    where
        T: Sync,
        U: Send,
        F: Fn(&T) -> U + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if let Some(pool) = &self.pool {
            use rayon::prelude::*;
            return pool.install(|| items.par_iter().map(&f).collect());
        }
        items.iter().map(f).collect()
    }

    /// Like [`map`](Self::map) over `0..n`.
    pub fn map_range<U, F>(&self, n: usize, f: F) -> Vec<U>
    where
        U: Send,
        F: Fn(usize) -> U + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if let Some(pool) = &self.pool {
            use rayon::prelude::*;
            return pool.install(|| (0..n).into_par_iter().map(&f).collect());
        }
        (0..n).map(f).collect()
    }
}
