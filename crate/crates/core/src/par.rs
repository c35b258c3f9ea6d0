//! Data-parallel map with a sequential fallback.
//!
//! With the `parallel` feature (default) and `jobs > 1`, work runs on a
//! dedicated rayon pool of `jobs` threads. Otherwise it runs in order on the
//! calling thread. Output order always matches input order, and every
//! per-item computation is independent, so results are identical in both
//! modes.

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Parallelism {
    jobs: usize,
}

impl Parallelism {
    pub fn sequential() -> Self {
        Self { jobs: 1 }
    }

    /// `0` means "all available cores".
    pub fn with_jobs(jobs: usize) -> Self {
        let jobs = if jobs == 0 {
            std::thread::available_parallelism()
                .map(|n| n.get())
                .unwrap_or(1)
        } else {
            jobs
        };
        Self { jobs }
    }

    pub fn jobs(&self) -> usize {
        self.jobs
    }

    pub fn is_sequential(&self) -> bool {
        self.jobs <= 1 || !cfg!(feature = "parallel")
    }

    pub fn map<T, R, F>(&self, items: &[T], f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(&T) -> R + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if !self.is_sequential() && items.len() > 1 {
            use rayon::prelude::*;
            // Nested calls run on whichever pool the caller is already in.
            if rayon::current_thread_index().is_some() {
                return items.par_iter().map(&f).collect();
            }
            match pool(self.jobs) {
                Some(pool) => return pool.install(|| items.par_iter().map(&f).collect()),
                None => log::warn!("rayon pool unavailable; running sequentially"),
            }
        }
        items.iter().map(f).collect()
    }

    /// Like [`map`](Self::map) but short-circuits on the first error in input order.
    pub fn try_map<T, R, E, F>(&self, items: &[T], f: F) -> Result<Vec<R>, E>
    where
        T: Sync,
        R: Send,
        E: Send,
        F: Fn(&T) -> Result<R, E> + Sync + Send,
    {
        self.map(items, f).into_iter().collect()
    }
}

#[cfg(feature = "parallel")]
fn pool(jobs: usize) -> Option<std::sync::Arc<rayon::ThreadPool>> {
    use std::collections::HashMap;
    use std::sync::{Arc, Mutex, OnceLock};

    static POOLS: OnceLock<Mutex<HashMap<usize, Arc<rayon::ThreadPool>>>> = OnceLock::new();
    let mut pools = POOLS.get_or_init(Default::default).lock().ok()?;
    if let Some(p) = pools.get(&jobs) {
        return Some(p.clone());
    }
    let p = Arc::new(rayon::ThreadPoolBuilder::new().num_threads(jobs).build().ok()?);
    pools.insert(jobs, p.clone());
    Some(p)
}

impl Default for Parallelism {
    fn default() -> Self {
        Self::with_jobs(0)
    }
}
