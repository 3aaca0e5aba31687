//! Row-band parallelism over scoped threads.
//!
//! Output is split into contiguous bands of whole rows, one per worker, so
//! each pixel is written by exactly one thread and results do not depend on
//! the worker count.

use std::ops::Range;

/// Calls `f(rows, band)` for each band of rows, where `band` is the slice of
/// `data` holding those rows (`row_len` elements per row).
pub(crate) fn for_each_band<T, F>(data: &mut [T], row_len: usize, workers: usize, f: F)
where
    T: Send,
    F: Fn(Range<usize>, &mut [T]) + Sync,
{
    if row_len == 0 || data.is_empty() {
        return;
    }
    let rows = data.len() / row_len;
    let workers = workers.clamp(1, rows.max(1));
    if workers == 1 {
        f(0..rows, data);
        return;
    }
    let per = rows.div_ceil(workers);
    std::thread::scope(|scope| {
        let f = &f;
        for (i, band) in data.chunks_mut(per * row_len).enumerate() {
            let start = i * per;
            let end = start + band.len() / row_len;
            scope.spawn(move || f(start..end, band));
        }
    });
}

/// Runs `f` for each item, using up to `workers` threads, and returns the
/// results in input order.
pub(crate) fn map_ordered<I, R, F>(items: &[I], workers: usize, f: F) -> Vec<R>
where
    I: Sync,
    R: Send,
    F: Fn(&I) -> R + Sync,
{
    if workers <= 1 || items.len() <= 1 {
        return items.iter().map(&f).collect();
    }
    let per = items.len().div_ceil(workers.min(items.len()));
    std::thread::scope(|scope| {
        let f = &f;
        let handles: Vec<_> = items
            .chunks(per)
            .map(|chunk| scope.spawn(move || chunk.iter().map(f).collect::<Vec<R>>()))
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("worker thread panicked"))
            .collect()
    })
}
