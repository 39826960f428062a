//! Data-parallel kernels with a sequential fallback.
//!
//! With the `parallel` feature (default) node loops and sample batches are
//! dispatched to rayon; without it everything runs on the calling thread.
//! Both paths produce bit-identical results: reductions always sum fixed
//! chunks in index order, so the schedule never changes the rounding.
//!
//! [`sequential`] forces the sequential path for the duration of a closure,
//! which is how the benches compare the two backends in one binary.

use std::cell::Cell;

/// Element count per reduction chunk. Fixed so that partial sums are the
/// same regardless of how many threads run them.
pub const REDUCE_CHUNK: usize = 4096;

/// Node loops shorter than this stay sequential even when rayon is enabled.
pub const PAR_MIN_LEN: usize = 8192;

thread_local! {
    static FORCE_SEQUENTIAL: Cell<bool> = const { Cell::new(false) };
}

/// Run `f` with every kernel dispatched on the sequential path.
pub fn sequential<R>(f: impl FnOnce() -> R) -> R {
    struct Restore(bool);
    impl Drop for Restore {
        fn drop(&mut self) {
            FORCE_SEQUENTIAL.with(|c| c.set(self.0));
        }
    }
    let _restore = Restore(FORCE_SEQUENTIAL.with(|c| c.replace(true)));
    f()
}

/// True when the parallel backend is compiled in and not overridden.
pub fn parallel_enabled() -> bool {
    cfg!(feature = "parallel") && !FORCE_SEQUENTIAL.with(|c| c.get())
}

fn chunk_sum(start: usize, end: usize, f: &(impl Fn(usize) -> f64 + Sync)) -> f64 {
    let mut acc = 0.0;
    for i in start..end {
        acc += f(i);
    }
    acc
}

/// `Σ_{i<len} f(i)`, summed in fixed chunks.
pub fn sum_indexed(len: usize, f: impl Fn(usize) -> f64 + Sync) -> f64 {
    let chunks = len.div_ceil(REDUCE_CHUNK);
    let bounds = |c: usize| (c * REDUCE_CHUNK, ((c + 1) * REDUCE_CHUNK).min(len));

    #[cfg(feature = "parallel")]
    if parallel_enabled() && len >= PAR_MIN_LEN {
        use rayon::prelude::*;
        let partials: Vec<f64> = (0..chunks)
            .into_par_iter()
            .map(|c| {
                let (s, e) = bounds(c);
                chunk_sum(s, e, &f)
            })
            .collect();
        return partials.iter().fold(0.0, |acc, x| acc + x);
    }

    let mut total = 0.0;
    for c in 0..chunks {
        let (s, e) = bounds(c);
        total += chunk_sum(s, e, &f);
    }
    total
}

/// Maximum of `f(i)` over `i < len`; `f64::NEG_INFINITY` for an empty range.
pub fn max_indexed(len: usize, f: impl Fn(usize) -> f64 + Sync) -> f64 {
    #[cfg(feature = "parallel")]
    if parallel_enabled() && len >= PAR_MIN_LEN {
        use rayon::prelude::*;
        return (0..len)
            .into_par_iter()
            .map(&f)
            .reduce(|| f64::NEG_INFINITY, f64::max);
    }
    (0..len).map(f).fold(f64::NEG_INFINITY, f64::max)
}

/// Fill `out[i] = f(i)`.
pub fn fill_indexed(out: &mut [f64], f: impl Fn(usize) -> f64 + Sync) {
    #[cfg(feature = "parallel")]
    if parallel_enabled() && out.len() >= PAR_MIN_LEN {
        use rayon::prelude::*;
        out.par_iter_mut().enumerate().for_each(|(i, o)| *o = f(i));
        return;
    }
    for (i, o) in out.iter_mut().enumerate() {
        *o = f(i);
    }
}

/// In-place update `out[i] = f(i, out[i])`.
pub fn update_indexed(out: &mut [f64], f: impl Fn(usize, f64) -> f64 + Sync) {
    #[cfg(feature = "parallel")]
    if parallel_enabled() && out.len() >= PAR_MIN_LEN {
        use rayon::prelude::*;
        out.par_iter_mut().enumerate().for_each(|(i, o)| *o = f(i, *o));
        return;
    }
    for (i, o) in out.iter_mut().enumerate() {
        *o = f(i, *o);
    }
}

/// Fill `out` one contiguous row of `row_len` values at a time:
/// `f(row, &mut out[row * row_len..][..row_len])`.
pub fn fill_rows(out: &mut [f64], row_len: usize, f: impl Fn(usize, &mut [f64]) + Sync) {
    assert!(row_len > 0 && out.len().is_multiple_of(row_len));
    #[cfg(feature = "parallel")]
    if parallel_enabled() && out.len() >= PAR_MIN_LEN {
        use rayon::prelude::*;
        out.par_chunks_mut(row_len).enumerate().for_each(|(r, row)| f(r, row));
        return;
    }
    for (r, row) in out.chunks_mut(row_len).enumerate() {
        f(r, row);
    }
}

/// `Σ_{r<rows} f(r)`; per-row partials are added in row order.
pub fn sum_rows(rows: usize, row_len: usize, f: impl Fn(usize) -> f64 + Sync + Send) -> f64 {
    let _ = row_len; // only sizes the parallel cutoff
    #[cfg(feature = "parallel")]
    if parallel_enabled() && rows * row_len >= PAR_MIN_LEN {
        use rayon::prelude::*;
        let partials: Vec<f64> = (0..rows).into_par_iter().map(&f).collect();
        return partials.iter().fold(0.0, |acc, x| acc + x);
    }
    (0..rows).map(f).fold(0.0, |acc, x| acc + x)
}

/// Ordered map over a batch of independent work items (Monte-Carlo samples,
/// grid sweeps). Output order always matches input order.
pub fn map_batch<T, R>(items: &[T], f: impl Fn(&T) -> R + Sync + Send) -> Vec<R>
where
    T: Sync,
    R: Send,
{
    #[cfg(feature = "parallel")]
    if parallel_enabled() && items.len() > 1 {
        use rayon::prelude::*;
        return items.par_iter().map(f).collect();
    }
    items.iter().map(f).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chunked_sum_matches_across_backends() {
        let len = 3 * REDUCE_CHUNK + 17 + PAR_MIN_LEN;
        let f = |i: usize| ((i as f64) * 0.731).sin() * 1e-3 + 1.0 / (1.0 + i as f64);
        let par = sum_indexed(len, f);
        let seq = sequential(|| sum_indexed(len, f));
        assert_eq!(par.to_bits(), seq.to_bits());
    }

    #[test]
    fn sequential_override_is_scoped() {
        let before = parallel_enabled();
        sequential(|| assert!(!parallel_enabled()));
        assert_eq!(parallel_enabled(), before);
    }

    #[test]
    fn empty_ranges() {
        assert_eq!(sum_indexed(0, |_| 1.0), 0.0);
        assert_eq!(max_indexed(0, |_| 1.0), f64::NEG_INFINITY);
    }

    #[test]
    fn batch_preserves_order() {
        let items: Vec<usize> = (0..100).collect();
        let out = map_batch(&items, |&i| i * 2);
        assert!(out.iter().enumerate().all(|(i, &v)| v == 2 * i));
    }
}
