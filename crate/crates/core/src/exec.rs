//! Trial-level parallelism. With the `parallel` feature (the default) work
//! items fan out over a rayon pool; without it the same API runs
//! sequentially. Every item derives its own RNG stream, so the results are
//! identical no matter how the work is scheduled.

/// Map `f` over `0..count`, preserving order. `width` 0 uses the global
/// rayon pool, 1 forces the sequential path, anything else builds a pool of
/// that size.
#[cfg(feature = "parallel")]
pub fn map_indexed<T, F>(width: usize, count: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    use rayon::prelude::*;
    match width {
        1 => map_indexed_seq(count, f),
        0 => (0..count).into_par_iter().map(f).collect(),
        w => rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build()
            .expect("failed to build worker pool")
            .install(|| (0..count).into_par_iter().map(f).collect()),
    }
}

#[cfg(not(feature = "parallel"))]
pub fn map_indexed<T, F>(width: usize, count: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    let _ = width;
    map_indexed_seq(count, f)
}

/// Always-sequential variant; the benchmark suite compares this against the
/// parallel path.
pub fn map_indexed_seq<T, F>(count: usize, f: F) -> Vec<T>
where
    F: Fn(usize) -> T,
{
    (0..count).map(f).collect()
}
