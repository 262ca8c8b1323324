//! Matrix-multiply kernel backing every contraction.
//!
//! Contractions are canonicalized to one row-major GEMM, so this is the
//! single parallelization point of the crate. The parallel path splits the
//! output by rows; each element is still accumulated in the same order as
//! the sequential path, so results are bit-identical for any thread count.

use crate::scalar::Scalar;

/// Below this many fused multiply-adds the parallel dispatch overhead is not
/// worth paying.
const PAR_THRESHOLD: usize = 1 << 15;

/// `c += a · b` with `a` of shape `(m, k)`, `b` of shape `(k, n)`, all
/// row-major. `c` must hold `m * n` zeroed (or accumuland) entries.
pub fn matmul_seq<T: Scalar>(m: usize, k: usize, n: usize, a: &[T], b: &[T], c: &mut [T]) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(c.len(), m * n);
    for (c_row, a_row) in c.chunks_exact_mut(n).zip(a.chunks_exact(k)) {
        row_update(c_row, a_row, b, n);
    }
}

/// Parallel version of [`matmul_seq`]; same output bit-for-bit.
#[cfg(feature = "parallel")]
pub fn matmul_par<T: Scalar>(m: usize, k: usize, n: usize, a: &[T], b: &[T], c: &mut [T]) {
    use rayon::prelude::*;
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(c.len(), m * n);
    c.par_chunks_exact_mut(n)
        .zip(a.par_chunks_exact(k))
        .for_each(|(c_row, a_row)| row_update(c_row, a_row, b, n));
}

#[inline]
fn row_update<T: Scalar>(c_row: &mut [T], a_row: &[T], b: &[T], n: usize) {
    for (l, &a_il) in a_row.iter().enumerate() {
        let b_row = &b[l * n..(l + 1) * n];
        for (c_ij, &b_lj) in c_row.iter_mut().zip(b_row) {
            *c_ij += a_il * b_lj;
        }
    }
}

/// Dispatching entry point used by `contract`.
pub fn matmul<T: Scalar>(m: usize, k: usize, n: usize, a: &[T], b: &[T], c: &mut [T]) {
    #[cfg(feature = "parallel")]
    {
        if m * k * n >= PAR_THRESHOLD && m > 1 {
            matmul_par(m, k, n, a, b, c);
            return;
        }
    }
    let _ = PAR_THRESHOLD;
    matmul_seq(m, k, n, a, b, c);
}
