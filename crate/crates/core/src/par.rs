//! Data-parallel helpers. With the `parallel` feature these run on the rayon
//! pool; without it they fall back to plain sequential iteration. Reductions
//! always collect per-item partial results first and sum them in index order,
//! so results are bit-identical between the two builds.

use ndarray::{ArrayView1, ArrayView3, ArrayViewMut1, ArrayViewMut3, Axis, Zip};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Evaluate `f` on `0..n` and collect the results in order.
pub fn map_range<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).collect()
    }
}

/// Map over a slice, preserving order.
pub fn map_slice<S, T, F>(items: &[S], f: F) -> Vec<T>
where
    S: Sync,
    T: Send,
    F: Fn(&S) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        items.par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.iter().map(f).collect()
    }
}

/// Ordered sum of `f(k)` over `0..n`; deterministic regardless of threading.
pub fn sum_range<F>(n: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    map_range(n, f).into_iter().sum()
}

/// Apply `f` to every 1-D lane of `input` along `axis`, writing the matching
/// lane of `out`.
pub fn zip_lanes<F>(mut out: ArrayViewMut3<'_, f64>, input: ArrayView3<'_, f64>, axis: Axis, f: F)
where
    F: Fn(ArrayView1<'_, f64>, ArrayViewMut1<'_, f64>) + Sync + Send,
{
    let zip = Zip::from(out.lanes_mut(axis)).and(input.lanes(axis));
    #[cfg(feature = "parallel")]
    zip.par_for_each(|o, i| f(i, o));
    #[cfg(not(feature = "parallel"))]
    zip.for_each(|o, i| f(i, o));
}

/// Run two closures, concurrently when the pool is available.
pub fn join<A, B, RA, RB>(a: A, b: B) -> (RA, RB)
where
    A: FnOnce() -> RA + Send,
    B: FnOnce() -> RB + Send,
    RA: Send,
    RB: Send,
{
    #[cfg(feature = "parallel")]
    {
        rayon::join(a, b)
    }
    #[cfg(not(feature = "parallel"))]
    {
        (a(), b())
    }
}
