use pas_core::Runner;
use rayon::prelude::*;

/// Runs indexed tasks on a dedicated rayon pool.
pub struct RayonRunner {
    pool: rayon::ThreadPool,
}

impl RayonRunner {
    /// `threads == 0` uses the number of available cores.
    pub fn new(threads: usize) -> Self {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().expect("thread pool");
        RayonRunner { pool }
    }

    pub fn threads(&self) -> usize {
        self.pool.current_num_threads()
    }
}

impl Runner for RayonRunner {
    fn map<T, F>(&self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        self.pool.install(|| (0..n).into_par_iter().map(&f).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn keeps_index_order() {
        let r = RayonRunner::new(4);
        assert_eq!(r.map(100, |i| i * i), (0..100).map(|i| i * i).collect::<Vec<_>>());
    }
}
