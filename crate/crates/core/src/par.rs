//! Thin switch between rayon and sequential iteration.
//!
//! With the `parallel` feature (default) the helpers fan out over the global
//! rayon pool; without it they run on the calling thread. Every helper keeps
//! output order identical to the sequential version, so results do not
//! depend on the thread count.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Applies `f(row_index, row)` to each `width`-sized chunk of `data`.
pub fn for_each_row_mut<F>(data: &mut [f64], width: usize, f: F)
where
    F: Fn(usize, &mut [f64]) + Sync + Send,
{
    if width == 0 {
        return;
    }
    #[cfg(feature = "parallel")]
    data.par_chunks_mut(width).enumerate().for_each(|(i, row)| f(i, row));
    #[cfg(not(feature = "parallel"))]
    data.chunks_mut(width).enumerate().for_each(|(i, row)| f(i, row));
}

/// Evaluates `f` on `0..n` and collects in index order.
pub fn map_range<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    return (0..n).into_par_iter().map(f).collect();
    #[cfg(not(feature = "parallel"))]
    return (0..n).map(f).collect();
}

/// Maps a slice in parallel, preserving order.
pub fn map_slice<S, T, F>(items: &[S], f: F) -> Vec<T>
where
    S: Sync,
    T: Send,
    F: Fn(&S) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    return items.par_iter().map(f).collect();
    #[cfg(not(feature = "parallel"))]
    return items.iter().map(f).collect();
}

/// Configures the global worker pool. `0` keeps the runtime default.
/// Has no effect without the `parallel` feature or once the pool exists.
pub fn init_threads(threads: usize) {
    #[cfg(feature = "parallel")]
    if threads > 0 {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global();
    }
    #[cfg(not(feature = "parallel"))]
    let _ = threads;
}

pub fn current_threads() -> usize {
    #[cfg(feature = "parallel")]
    return rayon::current_num_threads();
    #[cfg(not(feature = "parallel"))]
    return 1;
}
