//! Internal execution helpers: data-parallel maps with a sequential
//! fallback.
//!
//! All hot loops in the crate are index-parallel maps (ensemble members,
//! order-grid cells, level fits, per-day filters). They funnel through
//! [`map_indexed`], which uses rayon when the `parallel` feature is on and
//! a plain iterator otherwise. Callers must reduce the returned `Vec` in
//! index order; combined with per-index seeding this makes results
//! bit-identical across thread counts and feature choices.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Maps `f` over `0..n`, returning results in index order.
pub(crate) fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
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
