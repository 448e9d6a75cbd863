//! Dense products on row-major `n × c` fields.
//!
//! Work is split into fixed-size row chunks independent of the thread count,
//! and partial reductions are summed in chunk order, so every product is
//! bitwise reproducible however many threads rayon uses.

use ndarray::{s, Array2, ArrayView2, Axis, Zip};
use rayon::prelude::*;

const ROW_CHUNK: usize = 512;

/// `a · b`, parallel over row blocks of `a`.
pub fn matmul(a: ArrayView2<f64>, b: ArrayView2<f64>) -> Array2<f64> {
    assert_eq!(a.ncols(), b.nrows(), "matmul inner dimension");
    let mut out = Array2::<f64>::zeros((a.nrows(), b.ncols()));
    if a.nrows() <= ROW_CHUNK {
        ndarray::linalg::general_mat_mul(1.0, &a, &b, 0.0, &mut out);
        return out;
    }
    out.axis_chunks_iter_mut(Axis(0), ROW_CHUNK)
        .into_par_iter()
        .enumerate()
        .for_each(|(ci, mut block)| {
            let rows = a.slice(s![ci * ROW_CHUNK..ci * ROW_CHUNK + block.nrows(), ..]);
            ndarray::linalg::general_mat_mul(1.0, &rows, &b, 0.0, &mut block);
        });
    out
}

/// `aᵀ · b` for tall `a` and `b` sharing their row count. Rows are reduced in
/// fixed chunks whose partial products are summed in order.
pub fn matmul_tn(a: ArrayView2<f64>, b: ArrayView2<f64>) -> Array2<f64> {
    assert_eq!(a.nrows(), b.nrows(), "matmul_tn row dimension");
    let n = a.nrows();
    if n <= 4 * ROW_CHUNK {
        return a.t().dot(&b);
    }
    let chunk = 4 * ROW_CHUNK;
    let partials: Vec<Array2<f64>> = (0..n.div_ceil(chunk))
        .into_par_iter()
        .map(|ci| {
            let r = ci * chunk..((ci + 1) * chunk).min(n);
            a.slice(s![r.clone(), ..]).t().dot(&b.slice(s![r, ..]))
        })
        .collect();
    let mut iter = partials.into_iter();
    let mut acc = iter.next().unwrap();
    for p in iter {
        acc += &p;
    }
    acc
}

/// Scales row `i` of `x` by `d[i]`.
pub fn scale_rows(x: ArrayView2<f64>, d: &[f64]) -> Array2<f64> {
    assert_eq!(x.nrows(), d.len());
    let mut out = x.to_owned();
    Zip::from(out.rows_mut()).and(d).par_for_each(|mut row, &di| row *= di);
    out
}

/// Column sums with a fixed reduction order.
pub fn column_sums(x: ArrayView2<f64>) -> ndarray::Array1<f64> {
    x.sum_axis(Axis(0))
}
