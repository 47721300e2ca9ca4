use super::{check_len, NnError};

/// Row-major dense matrix of `f64`.
///
/// The product kernels accumulate each output element over the inner
/// dimension in ascending order, so results are bit-reproducible.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, NnError> {
        check_len("matrix data", rows * cols, data.len())?;
        if data.iter().any(|v| !v.is_finite()) {
            return Err(NnError::NonFinite("matrix data"));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, NnError> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            check_len("matrix row", cols, r.len())?;
            data.extend_from_slice(r);
        }
        Matrix::new(rows.len(), cols, data)
    }

    pub(crate) fn from_vec_unchecked(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), rows * cols);
        Matrix { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub(crate) fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_iter(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.cols.max(1)).take(self.rows)
    }

    /// New matrix made of the given rows, in the given order.
    pub fn select_rows(&self, idx: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(idx.len() * self.cols);
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        Matrix::from_vec_unchecked(idx.len(), self.cols, data)
    }

    pub fn transpose(&self) -> Matrix {
        let mut out = vec![0.0; self.data.len()];
        for r in 0..self.rows {
            for c in 0..self.cols {
                out[c * self.rows + r] = self.data[r * self.cols + c];
            }
        }
        Matrix::from_vec_unchecked(self.cols, self.rows, out)
    }

    /// `self · other`.
    pub fn matmul(&self, other: &Matrix) -> Result<Matrix, NnError> {
        check_len("matmul inner dimension", self.cols, other.rows)?;
        let n = other.cols;
        let mut out = vec![0.0; self.rows * n];
        for (a_row, c_row) in self.row_iter().zip(out.chunks_exact_mut(n.max(1))) {
            for (p, &a) in a_row.iter().enumerate() {
                // x + 0*b == x for finite b; sparse inputs skip most rows
                if a == 0.0 {
                    continue;
                }
                axpy(a, other.row(p), c_row);
            }
        }
        Ok(Matrix::from_vec_unchecked(self.rows, n, out))
    }

    /// `self · otherᵀ`.
    pub fn matmul_transposed(&self, other: &Matrix) -> Result<Matrix, NnError> {
        check_len("matmul_transposed inner dimension", self.cols, other.cols)?;
        self.matmul(&other.transpose())
    }

    /// `selfᵀ · other`.
    pub fn transpose_matmul(&self, other: &Matrix) -> Result<Matrix, NnError> {
        check_len("transpose_matmul inner dimension", self.rows, other.rows)?;
        let m = self.cols;
        let n = other.cols;
        let mut out = vec![0.0; m * n];
        for (i, c_row) in out.chunks_exact_mut(n.max(1)).enumerate().take(m) {
            for p in 0..self.rows {
                let a = self.data[p * m + i];
                if a == 0.0 {
                    continue;
                }
                axpy(a, other.row(p), c_row);
            }
        }
        Ok(Matrix::from_vec_unchecked(m, n, out))
    }

    /// `self · x` for a column vector `x`.
    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>, NnError> {
        check_len("matvec input", self.cols, x.len())?;
        Ok(self
            .row_iter()
            .map(|r| r.iter().zip(x).fold(0.0, |acc, (a, b)| acc + a * b))
            .collect())
    }

    /// Sum over rows, giving one value per column.
    pub fn column_sums(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.cols];
        for r in self.row_iter() {
            for (o, v) in out.iter_mut().zip(r) {
                *o += v;
            }
        }
        out
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

#[inline]
fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Rng;

    fn random(rows: usize, cols: usize, rng: &mut Rng, sparsity: f64) -> Matrix {
        let data = (0..rows * cols)
            .map(|_| {
                if rng.next_f64() < sparsity {
                    0.0
                } else {
                    rng.uniform(-1.0, 1.0)
                }
            })
            .collect();
        Matrix::new(rows, cols, data).unwrap()
    }

    fn naive(a: &Matrix, b: &Matrix) -> Matrix {
        let mut out = Matrix::zeros(a.rows(), b.cols());
        for i in 0..a.rows() {
            for j in 0..b.cols() {
                let mut s = 0.0;
                for p in 0..a.cols() {
                    s += a.get(i, p) * b.get(p, j);
                }
                out.data[i * b.cols() + j] = s;
            }
        }
        out
    }

    fn assert_close(a: &Matrix, b: &Matrix) {
        assert_eq!((a.rows(), a.cols()), (b.rows(), b.cols()));
        for (x, y) in a.as_slice().iter().zip(b.as_slice()) {
            assert!((x - y).abs() < 1e-12, "{x} vs {y}");
        }
    }

    #[test]
    fn products_match_naive() {
        let mut rng = Rng::new(1);
        let a = random(7, 5, &mut rng, 0.3);
        let b = random(5, 9, &mut rng, 0.3);
        assert_close(&a.matmul(&b).unwrap(), &naive(&a, &b));
        let bt = b.transpose();
        assert_close(&a.matmul_transposed(&bt).unwrap(), &naive(&a, &b));
        let at = a.transpose();
        assert_close(&at.transpose_matmul(&b).unwrap(), &naive(&a, &b));
        let x: Vec<f64> = (0..5).map(|i| i as f64 - 2.0).collect();
        let xm = Matrix::new(5, 1, x.clone()).unwrap();
        let mv = a.matvec(&x).unwrap();
        assert_close(&Matrix::new(7, 1, mv).unwrap(), &naive(&a, &xm));
    }

    #[test]
    fn shape_errors() {
        let a = Matrix::zeros(2, 3);
        assert!(matches!(a.matmul(&a), Err(NnError::InputShape { .. })));
        assert!(a.matvec(&[1.0; 2]).is_err());
        assert!(Matrix::new(2, 2, vec![0.0; 3]).is_err());
        assert!(Matrix::new(1, 1, vec![f64::NAN]).is_err());
        assert!(Matrix::from_rows(&[vec![1.0], vec![1.0, 2.0]]).is_err());
    }

    #[test]
    fn select_and_sums() {
        let m = Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0], vec![5.0, 6.0]]).unwrap();
        let s = m.select_rows(&[2, 0]);
        assert_eq!(s.as_slice(), &[5.0, 6.0, 1.0, 2.0]);
        assert_eq!(m.column_sums(), vec![9.0, 12.0]);
        assert_eq!(m.transpose().row(1), &[2.0, 4.0, 6.0]);
    }
}
