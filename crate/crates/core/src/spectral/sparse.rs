//! Compressed sparse row matrices over real or complex scalars.

use ndarray::{Array2, ArrayView2, Axis, Zip};
use num_complex::Complex64;
use std::ops::{AddAssign, Mul};

#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix<T> {
    n_rows: usize,
    n_cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<u32>,
    values: Vec<T>,
}

impl<T> CsrMatrix<T>
where
    T: Copy + Default + AddAssign + Send + Sync,
{
    /// Builds from `(row, col, value)` triplets, summing duplicates and
    /// sorting columns within each row.
    pub fn from_triplets(n_rows: usize, n_cols: usize, triplets: &[(usize, usize, T)]) -> Self {
        let mut counts = vec![0usize; n_rows + 1];
        for &(r, c, _) in triplets {
            assert!(r < n_rows && c < n_cols, "triplet ({r},{c}) out of bounds");
            counts[r + 1] += 1;
        }
        for i in 0..n_rows {
            counts[i + 1] += counts[i];
        }
        let mut fill = counts.clone();
        let mut cols = vec![0u32; triplets.len()];
        let mut vals = vec![T::default(); triplets.len()];
        for &(r, c, v) in triplets {
            cols[fill[r]] = c as u32;
            vals[fill[r]] = v;
            fill[r] += 1;
        }
        let mut row_ptr = Vec::with_capacity(n_rows + 1);
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values = Vec::with_capacity(triplets.len());
        row_ptr.push(0);
        let mut order: Vec<usize> = Vec::new();
        for r in 0..n_rows {
            let range = counts[r]..counts[r + 1];
            order.clear();
            order.extend(range);
            // Stable sort keeps duplicate summation in insertion order.
            order.sort_by_key(|&p| cols[p]);
            for &p in &order {
                if col_idx.len() > row_ptr[r] && *col_idx.last().unwrap() == cols[p] {
                    *values.last_mut().unwrap() += vals[p];
                } else {
                    col_idx.push(cols[p]);
                    values.push(vals[p]);
                }
            }
            row_ptr.push(col_idx.len());
        }
        Self {
            n_rows,
            n_cols,
            row_ptr,
            col_idx,
            values,
        }
    }

    /// Assembles from raw CSR arrays, checking structural consistency.
    pub fn from_raw(
        n_rows: usize,
        n_cols: usize,
        row_ptr: Vec<usize>,
        col_idx: Vec<u32>,
        values: Vec<T>,
    ) -> Result<Self, String> {
        if row_ptr.len() != n_rows + 1 || row_ptr[0] != 0 {
            return Err("row pointer length/start mismatch".into());
        }
        if row_ptr.windows(2).any(|w| w[0] > w[1]) || *row_ptr.last().unwrap() != col_idx.len() {
            return Err("row pointers not monotone or inconsistent with nnz".into());
        }
        if values.len() != col_idx.len() {
            return Err("values/columns length mismatch".into());
        }
        if col_idx.iter().any(|&c| c as usize >= n_cols) {
            return Err("column index out of range".into());
        }
        Ok(Self {
            n_rows,
            n_cols,
            row_ptr,
            col_idx,
            values,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[u32] {
        &self.col_idx
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    /// `(col, value)` pairs of row `r`.
    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, T)> + '_ {
        let range = self.row_ptr[r]..self.row_ptr[r + 1];
        self.col_idx[range.clone()]
            .iter()
            .zip(&self.values[range])
            .map(|(&c, &v)| (c as usize, v))
    }

    pub fn get(&self, r: usize, c: usize) -> T {
        self.row(r).find(|&(cc, _)| cc == c).map(|(_, v)| v).unwrap_or_default()
    }

    pub fn transpose(&self) -> Self {
        let triplets: Vec<(usize, usize, T)> = (0..self.n_rows)
            .flat_map(|r| self.row(r).map(move |(c, v)| (c, r, v)))
            .collect();
        Self::from_triplets(self.n_cols, self.n_rows, &triplets)
    }

    pub fn map<U>(&self, f: impl Fn(T) -> U) -> CsrMatrix<U> {
        CsrMatrix {
            n_rows: self.n_rows,
            n_cols: self.n_cols,
            row_ptr: self.row_ptr.clone(),
            col_idx: self.col_idx.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }
}

impl CsrMatrix<f64> {
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n_cols);
        (0..self.n_rows)
            .map(|r| self.row(r).map(|(c, v)| v * x[c]).sum())
            .collect()
    }

    /// `A · X` for a dense row-major `X`, parallel over output rows.
    pub fn mul_dense(&self, x: ArrayView2<f64>) -> Array2<f64> {
        mul_dense_generic(self, x, |v| v)
    }

    pub fn to_dense(&self) -> Array2<f64> {
        let mut out = Array2::zeros((self.n_rows, self.n_cols));
        for r in 0..self.n_rows {
            for (c, v) in self.row(r) {
                out[[r, c]] += v;
            }
        }
        out
    }
}

impl CsrMatrix<Complex64> {
    /// Applies the complex matrix to a real field: returns `(Re(A X), Im(A X))`.
    pub fn mul_real_dense(&self, x: ArrayView2<f64>) -> (Array2<f64>, Array2<f64>) {
        (
            mul_dense_generic(self, x, |v| v.re),
            mul_dense_generic(self, x, |v| v.im),
        )
    }

    /// `Re(A) · XR + Im(A) · XI`, the real adjoint pairing used in
    /// backpropagation when `A` is the transpose of a forward operator.
    pub fn mul_split_dense(&self, xr: ArrayView2<f64>, xi: ArrayView2<f64>) -> Array2<f64> {
        assert_eq!(xr.dim(), xi.dim());
        assert_eq!(xr.nrows(), self.n_cols);
        let mut out = Array2::zeros((self.n_rows, xr.ncols()));
        Zip::indexed(out.axis_iter_mut(Axis(0))).par_for_each(|r, mut row| {
            for (c, v) in self.row(r) {
                row.scaled_add(v.re, &xr.row(c));
                row.scaled_add(v.im, &xi.row(c));
            }
        });
        out
    }
}

fn mul_dense_generic<T, F>(a: &CsrMatrix<T>, x: ArrayView2<f64>, part: F) -> Array2<f64>
where
    T: Copy + Default + AddAssign + Send + Sync,
    F: Fn(T) -> f64 + Sync,
{
    assert_eq!(x.nrows(), a.n_cols, "sparse-dense inner dimension");
    let mut out = Array2::zeros((a.n_rows, x.ncols()));
    Zip::indexed(out.axis_iter_mut(Axis(0))).par_for_each(|r, mut row| {
        for (c, v) in a.row(r) {
            row.scaled_add(part(v), &x.row(c));
        }
    });
    out
}

impl<T: Copy + Mul<Output = T>> CsrMatrix<T> {
    pub fn scale(&mut self, s: T) {
        for v in &mut self.values {
            *v = *v * s;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn triplets_sum_duplicates_and_sort() {
        let m = CsrMatrix::from_triplets(2, 3, &[(0, 2, 1.0), (0, 0, 2.0), (0, 2, 3.0), (1, 1, -1.0)]);
        assert_eq!(m.row_ptr(), &[0, 2, 3]);
        assert_eq!(m.col_idx(), &[0, 2, 1]);
        assert_eq!(m.values(), &[2.0, 4.0, -1.0]);
        assert_eq!(m.get(0, 2), 4.0);
        assert_eq!(m.get(1, 0), 0.0);
        let t = m.transpose();
        assert_eq!(t.to_dense(), m.to_dense().t().to_owned());
    }

    #[test]
    fn dense_products() {
        let m = CsrMatrix::from_triplets(2, 2, &[(0, 0, 2.0), (0, 1, 1.0), (1, 1, 3.0)]);
        let x = array![[1.0, 2.0], [3.0, 4.0]];
        assert_eq!(m.mul_dense(x.view()), array![[5.0, 8.0], [9.0, 12.0]]);
        assert_eq!(m.mul_vec(&[1.0, 1.0]), vec![3.0, 3.0]);
        let c = CsrMatrix::from_triplets(1, 2, &[(0, 0, Complex64::new(1.0, 2.0)), (0, 1, Complex64::new(0.0, -1.0))]);
        let (re, im) = c.mul_real_dense(x.view());
        assert_eq!(re, array![[1.0, 2.0]]);
        assert_eq!(im, array![[2.0 - 3.0, 4.0 - 4.0]]);
    }
}
