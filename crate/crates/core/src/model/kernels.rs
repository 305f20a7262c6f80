//! Dense products with a fixed row-block partition.
//!
//! Each output block is computed by the same single-threaded GEMM whatever
//! the thread count, so parallel and sequential builds agree bit for bit.

use ndarray::{concatenate, s, Array2, ArrayView2, Axis};

use crate::par;

pub const ROW_BLOCK: usize = 64;

fn blocks(n: usize) -> usize {
    n.div_ceil(ROW_BLOCK)
}

fn stack(parts: Vec<Array2<f64>>, axis: Axis, fallback: (usize, usize)) -> Array2<f64> {
    if parts.is_empty() {
        return Array2::zeros(fallback);
    }
    let views: Vec<_> = parts.iter().map(|p| p.view()).collect();
    concatenate(axis, &views).expect("blocks share the other dimension")
}

/// `a · bᵀ` for `a: m×k`, `b: n×k`, split over rows of `a`.
pub fn matmul_nt(a: ArrayView2<'_, f64>, b: ArrayView2<'_, f64>) -> Array2<f64> {
    let m = a.nrows();
    let parts = par::map_range(blocks(m), |i| {
        let r = i * ROW_BLOCK..((i + 1) * ROW_BLOCK).min(m);
        a.slice(s![r, ..]).dot(&b.t())
    });
    stack(parts, Axis(0), (m, b.nrows()))
}

/// `a · b` for `a: m×k`, `b: k×n`, split over rows of `a`.
pub fn matmul_nn(a: ArrayView2<'_, f64>, b: ArrayView2<'_, f64>) -> Array2<f64> {
    let m = a.nrows();
    let parts = par::map_range(blocks(m), |i| {
        let r = i * ROW_BLOCK..((i + 1) * ROW_BLOCK).min(m);
        a.slice(s![r, ..]).dot(&b)
    });
    stack(parts, Axis(0), (m, b.ncols()))
}

/// `aᵀ · b` for `a: m×p`, `b: m×n`, split over columns of `a` (rows of the result).
pub fn matmul_tn(a: ArrayView2<'_, f64>, b: ArrayView2<'_, f64>) -> Array2<f64> {
    let p = a.ncols();
    let parts = par::map_range(blocks(p), |i| {
        let r = i * ROW_BLOCK..((i + 1) * ROW_BLOCK).min(p);
        a.slice(s![.., r]).t().dot(&b)
    });
    stack(parts, Axis(0), (p, b.ncols()))
}
