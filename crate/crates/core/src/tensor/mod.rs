//! Dense numerical substrate: row-major matrices, activations, initialisation,
//! parameter storage and the seeded generator everything random draws from.

mod gemm;
pub mod ops;
mod params;
mod rng;

pub use gemm::{fused, madd, set_threads, threads, PackedB};
pub use params::{ParamId, ParamStore};
pub use rng::RngState;

use crate::error::{Result, SpinnError};

pub type Float = f64;

/// Width in bits of [`Float`], reported by benchmarks.
pub const FLOAT_BITS: usize = std::mem::size_of::<Float>() * 8;

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<Float>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<Float>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(SpinnError::Dimension {
                op: "Matrix::new",
                left: format!("{rows}x{cols}"),
                right: format!("{} values", data.len()),
            });
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn filled(rows: usize, cols: usize, value: Float) -> Self {
        Matrix { rows, cols, data: vec![value; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn row_vector(values: &[Float]) -> Self {
        Matrix { rows: 1, cols: values.len(), data: values.to_vec() }
    }

    pub fn from_rows<R: AsRef<[Float]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(SpinnError::dims("Matrix::from_rows", (1, cols), (1, r.len())));
            }
            data.extend_from_slice(r);
        }
        Ok(Matrix { rows: rows.len(), cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[Float] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [Float] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<Float> {
        self.data
    }

    pub fn row(&self, i: usize) -> &[Float] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [Float] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn get(&self, i: usize, j: usize) -> Float {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: Float) {
        self.data[i * self.cols + j] = v;
    }

    pub fn fill(&mut self, v: Float) {
        self.data.iter_mut().for_each(|x| *x = v);
    }

    pub fn transpose(&self) -> Matrix {
        let mut out = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        out
    }

    /// Standard product. Each entry sums over `k` left to right.
    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        let mut out = Matrix::zeros(self.rows, other.cols);
        out.add_matmul(self, other)?;
        Ok(out)
    }

    /// `self += a * b`.
    pub fn add_matmul(&mut self, a: &Matrix, b: &Matrix) -> Result<()> {
        if a.cols != b.rows {
            return Err(SpinnError::dims("matmul", a.shape(), b.shape()));
        }
        if self.rows != a.rows || self.cols != b.cols {
            return Err(SpinnError::dims("matmul output", self.shape(), (a.rows, b.cols)));
        }
        gemm::gemm_acc(a.rows, a.cols, b.cols, &a.data, &b.data, &mut self.data);
        Ok(())
    }

    /// Packs `self` as the right-hand side of repeated products.
    pub fn packed(&self) -> PackedB<'_> {
        PackedB::new(self.rows, self.cols, &self.data)
    }

    /// `self * b` with `b` prepacked; bit-identical to [`Matrix::matmul`].
    pub fn matmul_packed(&self, b: &PackedB<'_>) -> Result<Matrix> {
        if self.cols != b.rows() {
            return Err(SpinnError::dims("matmul", self.shape(), (b.rows(), b.cols())));
        }
        let mut out = Matrix::zeros(self.rows, b.cols());
        gemm::gemm_acc_packed(self.rows, &self.data, b, &mut out.data);
        Ok(out)
    }

    /// `self += aᵀ * b` without the caller materialising the transpose.
    pub fn add_matmul_tn(&mut self, a: &Matrix, b: &Matrix) -> Result<()> {
        if a.rows != b.rows {
            return Err(SpinnError::dims("matmul_tn", a.shape(), b.shape()));
        }
        self.add_matmul(&a.transpose(), b)
    }

    /// Adds `bias` to every row.
    pub fn add_row(&mut self, bias: &[Float]) -> Result<()> {
        if bias.len() != self.cols {
            return Err(SpinnError::dims("add_row", self.shape(), (1, bias.len())));
        }
        for row in self.data.chunks_exact_mut(self.cols) {
            for (x, b) in row.iter_mut().zip(bias) {
                *x += *b;
            }
        }
        Ok(())
    }

    /// Accumulates the column sums of `self` into `out`.
    pub fn add_column_sums_to(&self, out: &mut [Float]) {
        debug_assert_eq!(out.len(), self.cols);
        for row in self.data.chunks_exact(self.cols) {
            for (o, x) in out.iter_mut().zip(row) {
                *o += *x;
            }
        }
    }

    pub fn map(&self, f: impl Fn(Float) -> Float) -> Matrix {
        Matrix { rows: self.rows, cols: self.cols, data: self.data.iter().map(|&x| f(x)).collect() }
    }

    pub fn add_assign(&mut self, other: &Matrix) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(SpinnError::dims("add_assign", self.shape(), other.shape()));
        }
        for (x, y) in self.data.iter_mut().zip(&other.data) {
            *x += *y;
        }
        Ok(())
    }

    pub fn scale(&mut self, s: Float) {
        self.data.iter_mut().for_each(|x| *x *= s);
    }

    pub fn sum_squares(&self) -> Float {
        self.data.iter().map(|x| x * x).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn ensure_finite(&self, what: &str) -> Result<()> {
        if self.is_finite() {
            Ok(())
        } else {
            Err(SpinnError::NonFinite(what.to_string()))
        }
    }

    pub fn max_abs_diff(&self, other: &Matrix) -> Float {
        assert_eq!(self.shape(), other.shape());
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, Float::max)
    }

    /// Gathers the listed rows into a new matrix.
    pub fn select_rows(&self, rows: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(rows.len() * self.cols);
        for &r in rows {
            data.extend_from_slice(self.row(r));
        }
        Matrix { rows: rows.len(), cols: self.cols, data }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_times_column() {
        let a = Matrix::identity(2);
        let b = Matrix::new(2, 1, vec![3.0, 4.0]).unwrap();
        assert_eq!(a.matmul(&b).unwrap().data(), &[3.0, 4.0]);
    }

    #[test]
    fn row_times_column() {
        let a = Matrix::row_vector(&[1.0, 2.0]);
        let b = Matrix::new(2, 1, vec![3.0, 4.0]).unwrap();
        assert_eq!(a.matmul(&b).unwrap().data(), &[11.0]);
    }

    #[test]
    fn shape_mismatch_names_both_shapes() {
        let a = Matrix::zeros(2, 3);
        let b = Matrix::zeros(2, 3);
        let msg = a.matmul(&b).unwrap_err().to_string();
        assert!(msg.contains("2x3") && msg.matches("2x3").count() == 2, "{msg}");
    }

    #[test]
    fn random_product_matches_triple_loop_exactly() {
        let mut rng = RngState::new(7);
        let a = ops::uniform_init(5, 7, -1.0, 1.0, &mut rng).unwrap();
        let b = ops::uniform_init(7, 3, -1.0, 1.0, &mut rng).unwrap();
        let c = a.matmul(&b).unwrap();
        for i in 0..5 {
            for j in 0..3 {
                let mut s: Float = 0.0;
                for k in 0..7 {
                    s = madd(s, a.get(i, k), b.get(k, j));
                }
                assert_eq!(c.get(i, j).to_bits(), s.to_bits());
            }
        }
    }

    #[test]
    fn transposed_product() {
        let mut rng = RngState::new(3);
        let a = ops::uniform_init(6, 4, -1.0, 1.0, &mut rng).unwrap();
        let b = ops::uniform_init(6, 5, -1.0, 1.0, &mut rng).unwrap();
        let mut c = Matrix::zeros(4, 5);
        c.add_matmul_tn(&a, &b).unwrap();
        let want = a.transpose().matmul(&b).unwrap();
        assert_eq!(c, want);
    }
}
