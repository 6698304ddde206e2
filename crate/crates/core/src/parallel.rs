//! Data-parallel kernels with a sequential fallback.
//!
//! With the `parallel` feature (default) the helpers below dispatch onto the
//! rayon global pool; without it they run as plain iterator loops. Reductions
//! are always performed over fixed-size chunks whose partial sums are then
//! added in index order, so results are bitwise identical regardless of the
//! thread count or feature selection.

/// Chunk length for reductions and pointwise maps.
pub const CHUNK: usize = 4096;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// `Σ f(i, x_i)` over a slice, reduced chunk-wise in a fixed order.
pub fn sum_indexed<T, F>(data: &[T], f: F) -> f64
where
    T: Sync,
    F: Fn(usize, &T) -> f64 + Sync + Send,
{
    let partial = |(c, chunk): (usize, &[T])| -> f64 {
        let base = c * CHUNK;
        chunk
            .iter()
            .enumerate()
            .map(|(i, x)| f(base + i, x))
            .sum::<f64>()
    };
    #[cfg(feature = "parallel")]
    let parts: Vec<f64> = if data.len() > CHUNK {
        data.par_chunks(CHUNK).enumerate().map(partial).collect()
    } else {
        data.chunks(CHUNK).enumerate().map(partial).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let parts: Vec<f64> = data.chunks(CHUNK).enumerate().map(partial).collect();
    parts.into_iter().sum()
}

/// `Σ f(i, a_i, b_i)` over two aligned slices.
pub fn sum_zip<A, B, F>(a: &[A], b: &[B], f: F) -> f64
where
    A: Sync,
    B: Sync,
    F: Fn(usize, &A, &B) -> f64 + Sync + Send,
{
    assert_eq!(a.len(), b.len());
    sum_indexed(a, |i, x| f(i, x, &b[i]))
}

/// Applies `f(i, &mut x_i)` to every element.
pub fn for_each_indexed<T, F>(data: &mut [T], f: F)
where
    T: Send,
    F: Fn(usize, &mut T) + Sync + Send,
{
    let run = |(c, chunk): (usize, &mut [T])| {
        let base = c * CHUNK;
        for (i, x) in chunk.iter_mut().enumerate() {
            f(base + i, x);
        }
    };
    #[cfg(feature = "parallel")]
    if data.len() > CHUNK {
        data.par_chunks_mut(CHUNK).enumerate().for_each(run);
        return;
    }
    data.chunks_mut(CHUNK).enumerate().for_each(run);
}

/// Applies `f` to contiguous blocks of length `block` (the last one may be
/// shorter), in parallel when enabled.
pub fn for_each_block<T, F>(data: &mut [T], block: usize, f: F)
where
    T: Send,
    F: Fn(usize, &mut [T]) + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if data.len() / block.max(1) > 1 {
        data.par_chunks_mut(block)
            .enumerate()
            .for_each(|(b, chunk)| f(b, chunk));
        return;
    }
    data.chunks_mut(block)
        .enumerate()
        .for_each(|(b, chunk)| f(b, chunk));
}

/// Maps independent jobs (experiment runs, multi-start flows) to results,
/// preserving input order.
pub fn map_jobs<I, T, F>(jobs: Vec<I>, f: F) -> Vec<T>
where
    I: Send,
    T: Send,
    F: Fn(I) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        jobs.into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        jobs.into_iter().map(f).collect()
    }
}

/// Number of worker threads the kernels will use.
pub fn threads() -> usize {
    #[cfg(feature = "parallel")]
    {
        rayon::current_num_threads()
    }
    #[cfg(not(feature = "parallel"))]
    {
        1
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chunked_sum_is_order_stable() {
        let v: Vec<f64> = (0..10_000).map(|i| (i as f64 * 0.37).sin()).collect();
        let a = sum_indexed(&v, |_, x| *x);
        let b = sum_indexed(&v, |_, x| *x);
        assert_eq!(a.to_bits(), b.to_bits());
        let direct: f64 = v.chunks(CHUNK).map(|c| c.iter().sum::<f64>()).sum();
        assert_eq!(a.to_bits(), direct.to_bits());
    }

    #[test]
    fn indexed_map_covers_every_element() {
        let mut v = vec![0usize; 9000];
        for_each_indexed(&mut v, |i, x| *x = i);
        assert!(v.iter().enumerate().all(|(i, x)| i == *x));
    }

    #[test]
    fn jobs_keep_order() {
        let out = map_jobs((0..16).collect(), |i: i32| i * i);
        assert_eq!(out, (0..16).map(|i| i * i).collect::<Vec<_>>());
    }
}
