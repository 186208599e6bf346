//! Chunked data-parallel map over index ranges.
//!
//! Work is split into fixed-size chunks whose results are returned in chunk
//! order, so any fold the caller performs over them is independent of the
//! thread count. With the `parallel` feature disabled the same chunks are
//! visited sequentially and every reduction is bit-identical.

use std::ops::Range;

/// Number of quadrature points handled by one task.
pub const CHUNK: usize = 256;

pub fn map_chunks<R, F>(len: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(Range<usize>) -> R + Sync + Send,
{
    let chunks = len.div_ceil(CHUNK);
    let range = move |c: usize| c * CHUNK..((c + 1) * CHUNK).min(len);
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..chunks).into_par_iter().map(|c| f(range(c))).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..chunks).map(|c| f(range(c))).collect()
    }
}

/// Sum per-chunk `(scalar, vector)` pairs in chunk order.
pub fn reduce_pairs(parts: Vec<(f64, Vec<f64>)>, width: usize) -> (f64, Vec<f64>) {
    let mut total = 0.0;
    let mut acc = vec![0.0; width];
    for (s, v) in parts {
        total += s;
        for (a, b) in acc.iter_mut().zip(&v) {
            *a += b;
        }
    }
    (total, acc)
}

/// True when the crate was built with rayon support.
pub fn is_parallel() -> bool {
    cfg!(feature = "parallel")
}
