//! Batch execution of independent cells (episodes, sweep points). Results
//! always come back in input order, so both strategies produce identical
//! output.

use crate::error::{LrnError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Execution {
    Sequential,
    /// Rayon work stealing when the `parallel` feature is on; falls back to
    /// sequential otherwise.
    Parallel,
}

impl Default for Execution {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Execution::Parallel
        } else {
            Execution::Sequential
        }
    }
}

/// Applies `f(index, item)` to every item and returns results in input order.
pub fn map_ordered<T, R, F>(exec: Execution, items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(usize, &T) -> R + Sync + Send,
{
    match exec {
        Execution::Sequential => items.iter().enumerate().map(|(i, t)| f(i, t)).collect(),
        Execution::Parallel => par_map(items, f),
    }
}

#[cfg(feature = "parallel")]
fn par_map<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(usize, &T) -> R + Sync + Send,
{
    use rayon::prelude::*;
    items.par_iter().enumerate().map(|(i, t)| f(i, t)).collect()
}

#[cfg(not(feature = "parallel"))]
fn par_map<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(usize, &T) -> R + Sync + Send,
{
    items.iter().enumerate().map(|(i, t)| f(i, t)).collect()
}

/// Caps the global rayon pool. A no-op without the `parallel` feature, and
/// harmless if the pool already exists.
pub fn init_threads(threads: usize) -> Result<()> {
    if threads == 0 {
        return Err(LrnError::Config("thread count must be at least 1".into()));
    }
    #[cfg(feature = "parallel")]
    {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn both_strategies_keep_input_order() {
        let items: Vec<u64> = (0..500).collect();
        let f = |i: usize, x: &u64| (i as u64) * 1000 + x * x;
        let s = map_ordered(Execution::Sequential, &items, f);
        let p = map_ordered(Execution::Parallel, &items, f);
        assert_eq!(s, p);
        assert_eq!(s[7], 7049);
    }

    #[test]
    fn empty_input() {
        let items: Vec<u8> = Vec::new();
        assert!(map_ordered(Execution::Parallel, &items, |_, x| *x).is_empty());
    }

    #[test]
    fn zero_threads_rejected() {
        assert!(init_threads(0).is_err());
    }
}
