//! Row-loop dispatch. With the `parallel` feature, rows are distributed over
//! the current rayon pool; otherwise they run in order on the caller's
//! thread. Each row is computed by the same closure either way.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Calls `f(i, row_i)` for every `cols`-wide row of `data`.
pub(crate) fn for_each_row<T, F>(data: &mut [T], cols: usize, f: F)
where
    T: Send,
    F: Fn(usize, &mut [T]) + Send + Sync,
{
    if cols == 0 {
        return;
    }
    #[cfg(feature = "parallel")]
    data.par_chunks_mut(cols)
        .enumerate()
        .for_each(|(i, row)| f(i, row));
    #[cfg(not(feature = "parallel"))]
    data.chunks_mut(cols)
        .enumerate()
        .for_each(|(i, row)| f(i, row));
}

/// Like [`for_each_row`], but `f` may fail. Every row is visited; the
/// error from the lowest failing row index is returned.
pub(crate) fn try_for_each_row<T, E, F>(data: &mut [T], cols: usize, f: F) -> Result<(), E>
where
    T: Send,
    E: Send,
    F: Fn(usize, &mut [T]) -> Result<(), E> + Send + Sync,
{
    if cols == 0 {
        return Ok(());
    }
    #[cfg(feature = "parallel")]
    let first = data
        .par_chunks_mut(cols)
        .enumerate()
        .filter_map(|(i, row)| f(i, row).err().map(|e| (i, e)))
        .min_by_key(|(i, _)| *i);
    #[cfg(not(feature = "parallel"))]
    let first = data
        .chunks_mut(cols)
        .enumerate()
        .filter_map(|(i, row)| f(i, row).err().map(|e| (i, e)))
        .next();
    match first {
        Some((_, e)) => Err(e),
        None => Ok(()),
    }
}

/// Maps `f` over `0..n` and collects in index order.
pub(crate) fn map_indices<R, F>(n: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Send + Sync,
{
    #[cfg(feature = "parallel")]
    return (0..n).into_par_iter().map(f).collect();
    #[cfg(not(feature = "parallel"))]
    return (0..n).map(f).collect();
}

/// Runs `f` with row loops confined to the calling thread.
pub fn sequential<R: Send>(f: impl FnOnce() -> R + Send) -> R {
    #[cfg(feature = "parallel")]
    {
        match rayon::ThreadPoolBuilder::new().num_threads(1).build() {
            Ok(pool) => pool.install(f),
            Err(_) => f(),
        }
    }
    #[cfg(not(feature = "parallel"))]
    f()
}
