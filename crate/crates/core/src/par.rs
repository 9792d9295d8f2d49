//! Data-parallel helpers with a sequential fallback.
//!
//! With the `parallel` feature (on by default) the parallel paths run on the
//! rayon global pool. Without it, [`Execution::Parallel`] silently runs
//! sequentially, so callers never need their own `cfg` switches.

use std::ops::Range;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// How a data-parallel loop should be executed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    Sequential,
    #[default]
    Parallel,
}

impl Execution {
    /// Whether parallel execution is compiled in.
    pub fn parallel_available() -> bool {
        cfg!(feature = "parallel")
    }
}

/// `sum(f(i) for i in range)`.
pub fn sum_range<F>(exec: Execution, range: Range<usize>, f: F) -> u64
where
    F: Fn(usize) -> u64 + Sync + Send,
{
    match exec {
        #[cfg(feature = "parallel")]
        Execution::Parallel => range.into_par_iter().map(f).sum(),
        _ => range.map(f).sum(),
    }
}

/// Same as [`sum_range`] for signed summands.
pub fn sum_range_i64<F>(exec: Execution, range: Range<usize>, f: F) -> i64
where
    F: Fn(usize) -> i64 + Sync + Send,
{
    match exec {
        #[cfg(feature = "parallel")]
        Execution::Parallel => range.into_par_iter().map(f).sum(),
        _ => range.map(f).sum(),
    }
}

/// `range.map(f).collect()`, preserving order.
pub fn map_range<T, F>(exec: Execution, range: Range<usize>, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    match exec {
        #[cfg(feature = "parallel")]
        Execution::Parallel => range.into_par_iter().map(f).collect(),
        _ => range.map(f).collect(),
    }
}

/// `items.iter().map(f).collect()`, preserving order.
pub fn map_slice<S, T, F>(exec: Execution, items: &[S], f: F) -> Vec<T>
where
    S: Sync,
    T: Send,
    F: Fn(&S) -> T + Sync + Send,
{
    match exec {
        #[cfg(feature = "parallel")]
        Execution::Parallel => items.par_iter().map(f).collect(),
        _ => items.iter().map(f).collect(),
    }
}

/// Number of worker threads a parallel loop will use.
pub fn workers(exec: Execution) -> usize {
    match exec {
        #[cfg(feature = "parallel")]
        Execution::Parallel => rayon::current_num_threads().max(1),
        _ => 1,
    }
}
