//! Data-parallel map helpers with a sequential fallback.
//!
//! Grid sweeps and randomized pair sweeps are embarrassingly parallel across
//! samples or instances. Work is mapped into an index-ordered `Vec` and
//! reduced by the caller in a fixed order, so results are bit-identical
//! whether the `parallel` feature is on or off.

#[cfg(feature = "parallel")]
pub fn map_range<U, F>(n: usize, f: F) -> Vec<U>
where
    U: Send,
    F: Fn(usize) -> U + Sync + Send,
{
    use rayon::prelude::*;
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn map_range<U, F>(n: usize, f: F) -> Vec<U>
where
    U: Send,
    F: Fn(usize) -> U + Sync + Send,
{
    map_range_seq(n, f)
}

/// Always-sequential twin of [`map_range`]; the bench suite compares the two.
pub fn map_range_seq<U, F>(n: usize, f: F) -> Vec<U>
where
    U: Send,
    F: Fn(usize) -> U + Sync + Send,
{
    (0..n).map(f).collect()
}

/// Fixed-order maximum; the reduction order never depends on thread timing.
pub fn fold_max(values: &[f64]) -> f64 {
    values.iter().fold(0.0_f64, |acc, &v| if v > acc { v } else { acc })
}
