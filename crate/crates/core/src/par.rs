use crate::prelude::*;

/// Evaluates `f(0..n)` and returns the results in index order.
#[cfg(feature = "std")]
pub(crate) fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    use rayon::prelude::*;
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "std"))]
pub(crate) fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    F: Fn(usize) -> T,
{
    (0..n).map(f).collect()
}

/// Splits `n` samples into chunks of `chunk` and returns `(chunk index, len)`.
pub(crate) fn chunks(n: u64, chunk: u64) -> Vec<(u64, u64)> {
    let chunk = chunk.max(1);
    let count = n.div_ceil(chunk);
    (0..count)
        .map(|i| (i, chunk.min(n - i * chunk)))
        .collect()
}

/// Fallible indexed map; the first error in index order wins.
pub(crate) fn try_map_indexed<T, F>(n: usize, f: F) -> crate::Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> crate::Result<T> + Sync + Send,
{
    map_indexed(n, f).into_iter().collect()
}
