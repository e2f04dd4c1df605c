//! Data-parallel map helpers with a sequential fallback.
//!
//! Grid-point kernels are embarrassingly parallel; every map below runs on
//! rayon when the `parallel` feature is enabled and sequentially otherwise.
//! Reductions (integrals, plaquette sums, quadratic-form assembly) are *not*
//! provided here: they stay sequential in index order so that reports are
//! bit-stable across runs and thread counts.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Map a slice to a vector, one output per input.
pub fn map_collect<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        items.par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.iter().map(f).collect()
    }
}

/// Map over indices `0..len`.
pub fn map_indices<U, F>(len: usize, f: F) -> Vec<U>
where
    U: Send,
    F: Fn(usize) -> U + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        (0..len).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..len).map(f).collect()
    }
}

/// Apply a kernel to disjoint contiguous chunks of a mutable buffer.
pub fn for_each_chunk_mut<T, F>(data: &mut [T], chunk: usize, f: F)
where
    T: Send,
    F: Fn(&mut [T]) + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        data.par_chunks_mut(chunk).for_each(f);
    }
    #[cfg(not(feature = "parallel"))]
    {
        data.chunks_mut(chunk).for_each(f);
    }
}
