//! Deterministic fork-join over index chunks.
//!
//! Parallel entry points in this crate split their work into fixed chunks,
//! map each chunk independently, and merge the per-chunk results in chunk
//! order. Because the chunking does not depend on the thread count, the
//! merged result is identical whether the map runs on rayon or on the
//! current thread, which is what the `*_seq` reference paths and the
//! determinism tests rely on.

use std::ops::Range;

pub(crate) fn chunk_ranges(n: usize, chunk: usize) -> Vec<Range<usize>> {
    assert!(chunk > 0);
    (0..n)
        .step_by(chunk)
        .map(|start| start..(start + chunk).min(n))
        .collect()
}

/// Map `f` over fixed chunks of `0..n`, returning results in chunk order.
/// Runs on rayon when the `parallel` feature is enabled.
pub(crate) fn map_chunks<T, F>(n: usize, chunk: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(Range<usize>) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        chunk_ranges(n, chunk).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        map_chunks_seq(n, chunk, f)
    }
}

/// Sequential reference for [`map_chunks`]. Always compiled so benchmarks
/// can compare the two paths within one build.
pub(crate) fn map_chunks_seq<T, F>(n: usize, chunk: usize, f: F) -> Vec<T>
where
    F: Fn(Range<usize>) -> T,
{
    chunk_ranges(n, chunk).into_iter().map(f).collect()
}
