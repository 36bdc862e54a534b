//! Index-parallel maps with a sequential fallback.
//!
//! Every solver loop that is parallel over rows, columns, or barycenter inputs
//! goes through these helpers. Each output slot depends only on its own index,
//! so the parallel and sequential paths return bit-identical results. Without
//! the `parallel` feature the `parallel` argument is ignored.

use crate::error::Result;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Below this many items the rayon dispatch overhead is not worth paying.
#[cfg(feature = "parallel")]
const MIN_PARALLEL_LEN: usize = 32;

pub(crate) fn map_indices<T, F>(len: usize, parallel: bool, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if parallel && len >= MIN_PARALLEL_LEN {
        return (0..len).into_par_iter().map(f).collect();
    }
    let _ = parallel;
    (0..len).map(f).collect()
}

/// Fallible variant. On failure the error of the lowest failing index is
/// returned, whichever path ran.
pub(crate) fn try_map_indices<T, F>(len: usize, parallel: bool, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync + Send,
{
    map_indices(len, parallel, f).into_iter().collect()
}

/// True when the crate was built with rayon support.
pub fn parallel_available() -> bool {
    cfg!(feature = "parallel")
}
