use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};

/// Compressed-row copy of a (mostly banded) dense matrix, used for cheap
/// quadratic forms inside time-stepping loops.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl CsrMatrix {
    pub fn from_dense(a: &DMatrix<f64>) -> Self {
        assert_eq!(a.nrows(), a.ncols());
        let n = a.nrows();
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for i in 0..n {
            for j in 0..n {
                let v = a[(i, j)];
                if v != 0.0 {
                    cols.push(j);
                    vals.push(v);
                }
            }
            row_ptr.push(cols.len());
        }
        CsrMatrix { n, row_ptr, cols, vals }
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    /// `xᵀ A y`.
    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> f64 {
        debug_assert!(x.len() == self.n && y.len() == self.n);
        let mut s = 0.0;
        for (i, xi) in x.iter().enumerate() {
            let mut row = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                row += self.vals[k] * y[self.cols[k]];
            }
            s += xi * row;
        }
        s
    }

    pub fn quadratic(&self, x: &[f64]) -> f64 {
        self.bilinear(x, x)
    }

    pub fn mul_vec(&self, x: &DVector<f64>) -> DVector<f64> {
        DVector::from_fn(self.n, |i, _| {
            (self.row_ptr[i]..self.row_ptr[i + 1]).map(|k| self.vals[k] * x[self.cols[k]]).sum()
        })
    }
}

/// One `row col value` line per nonzero entry.
pub fn to_triplet_text(a: &DMatrix<f64>) -> String {
    let mut out = String::new();
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            let v = a[(i, j)];
            if v != 0.0 {
                let _ = writeln!(out, "{i} {j} {v:.17e}");
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csr_matches_dense() {
        let a = DMatrix::from_row_slice(3, 3, &[2.0, -1.0, 0.0, -1.0, 2.0, -1.0, 0.0, -1.0, 2.0]);
        let s = CsrMatrix::from_dense(&a);
        assert_eq!(s.nnz(), 7);
        let x = DVector::from_vec(vec![1.0, 2.0, -0.5]);
        let y = DVector::from_vec(vec![0.3, -1.0, 4.0]);
        assert!((s.bilinear(x.as_slice(), y.as_slice()) - x.dot(&(&a * &y))).abs() < 1e-14);
        assert_eq!(s.mul_vec(&x), &a * &x);
        let text = to_triplet_text(&a);
        assert_eq!(text.lines().count(), 7);
        assert!(text.starts_with("0 0 2.0"));
    }
}
