//! Optional-parallelism shim.
//!
//! All ensemble loops go through [`map_indexed`] so the `parallel` feature is
//! the only place where rayon appears. Results come back in index order, and
//! all randomness is derived from per-index substreams, so the feature (and
//! the worker count) never changes any numeric output.

#[cfg(feature = "parallel")]
pub(crate) fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    use rayon::prelude::*;
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub(crate) fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    (0..n).map(f).collect()
}
