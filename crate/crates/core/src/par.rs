//! Data-parallel helpers. With the `parallel` feature (default) these fan out
//! over rayon; without it they run sequentially with identical results, since
//! every work item owns its index and summation order is fixed per item.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Map `f` over `0..n`, collecting results in index order.
pub(crate) fn par_map_indexed<T, F>(n: usize, f: F) -> Vec<T>
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

/// Like [`par_map_indexed`] but with a per-worker scratch value built by
/// `init`, for kernels that reuse a buffer across items.
pub(crate) fn par_map_with<S, T, I, F>(n: usize, init: I, f: F) -> Vec<T>
where
    S: Send,
    T: Send,
    I: Fn() -> S + Sync + Send,
    F: Fn(&mut S, usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        (0..n).into_par_iter().map_init(&init, |s, i| f(s, i)).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        let mut s = init();
        (0..n).map(|i| f(&mut s, i)).collect()
    }
}

/// True when the rayon path is compiled in; benches use this to label runs.
pub fn parallel_enabled() -> bool {
    cfg!(feature = "parallel")
}
