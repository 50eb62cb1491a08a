//! Ordered parallel map with a sequential fallback.
//!
//! With the `parallel` feature (default) work runs on the rayon pool;
//! without it, or with [`Execution::Sequential`], it runs on the caller's
//! thread. Output order is the input order either way, so reductions over
//! the result are independent of scheduling.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Execution {
    #[default]
    Parallel,
    Sequential,
}

#[cfg(feature = "parallel")]
pub fn map_indexed<T, F>(n: usize, exec: Execution, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    use rayon::prelude::*;
    match exec {
        Execution::Parallel => (0..n).into_par_iter().map(f).collect(),
        Execution::Sequential => (0..n).map(f).collect(),
    }
}

#[cfg(not(feature = "parallel"))]
pub fn map_indexed<T, F>(n: usize, _exec: Execution, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    (0..n).map(f).collect()
}

/// Map over a slice, preserving order.
pub fn map_slice<S, T, F>(items: &[S], exec: Execution, f: F) -> Vec<T>
where
    S: Sync,
    T: Send,
    F: Fn(&S) -> T + Sync + Send,
{
    map_indexed(items.len(), exec, |i| f(&items[i]))
}

/// Pairwise (tree) reduction with a fixed shape for a given length.
pub fn pairwise_reduce<T: Clone>(items: &[T], combine: &impl Fn(&T, &T) -> T) -> Option<T> {
    match items.len() {
        0 => None,
        1 => Some(items[0].clone()),
        n => {
            let (l, r) = items.split_at(n / 2);
            let l = pairwise_reduce(l, combine)?;
            let r = pairwise_reduce(r, combine)?;
            Some(combine(&l, &r))
        }
    }
}
