//! Execution strategy for independent indexed tasks.

use alloc::vec::Vec;

/// Maps `f` over `0..n` and returns the results in index order.
///
/// Implementations may run tasks concurrently; callers key all randomness by task
/// index so results never depend on scheduling.
pub trait Runner: Sync {
    fn map<T, F>(&self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send;
}

#[derive(Clone, Copy, Debug, Default)]
pub struct Sequential;

impl Runner for Sequential {
    fn map<T, F>(&self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        (0..n).map(f).collect()
    }
}
