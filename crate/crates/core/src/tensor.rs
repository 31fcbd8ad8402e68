//! Dense row-major double-precision tensors.
//!
//! Every tensor is two-dimensional; a vector of length `n` is an `n x 1`
//! column and a scalar is `1 x 1`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Shape {
    pub rows: usize,
    pub cols: usize,
}

impl Shape {
    pub const SCALAR: Shape = Shape { rows: 1, cols: 1 };

    pub fn new(rows: usize, cols: usize) -> Self {
        Shape { rows, cols }
    }

    pub fn vector(len: usize) -> Self {
        Shape { rows: len, cols: 1 }
    }

    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_vector(&self) -> bool {
        self.cols == 1
    }

    pub fn is_scalar(&self) -> bool {
        self.rows == 1 && self.cols == 1
    }

    pub fn dims(&self) -> [usize; 2] {
        [self.rows, self.cols]
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}x{}]", self.rows, self.cols)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    shape: Shape,
    data: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: Shape, data: Vec<f64>) -> Result<Self> {
        if shape.rows == 0 || shape.cols == 0 {
            return Err(Error::shape("tensor", format!("zero extent in {shape}")));
        }
        if shape.len() != data.len() {
            return Err(Error::shape(
                "tensor",
                format!("{shape} needs {} values, got {}", shape.len(), data.len()),
            ));
        }
        Ok(Tensor { shape, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Tensor {
            shape: Shape::new(rows, cols),
            data: vec![0.0; rows * cols],
        }
    }

    pub fn filled(rows: usize, cols: usize, value: f64) -> Self {
        Tensor {
            shape: Shape::new(rows, cols),
            data: vec![value; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut t = Tensor::zeros(n, n);
        for i in 0..n {
            t.data[i * n + i] = 1.0;
        }
        t
    }

    pub fn scalar(value: f64) -> Self {
        Tensor {
            shape: Shape::SCALAR,
            data: vec![value],
        }
    }

    /// Column vector from a slice.
    pub fn vector(values: &[f64]) -> Self {
        assert!(!values.is_empty(), "empty vector");
        Tensor {
            shape: Shape::vector(values.len()),
            data: values.to_vec(),
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::shape("tensor", "ragged rows"));
        }
        Tensor::new(Shape::new(r, c), rows.concat())
    }

    /// Matrix whose columns are the given vectors.
    pub fn from_columns(cols: &[Vec<f64>]) -> Result<Self> {
        let c = cols.len();
        let r = cols.first().map_or(0, Vec::len);
        if cols.iter().any(|col| col.len() != r) {
            return Err(Error::shape("tensor", "ragged columns"));
        }
        let mut data = vec![0.0; r * c];
        for (j, col) in cols.iter().enumerate() {
            for (i, v) in col.iter().enumerate() {
                data[i * c + j] = *v;
            }
        }
        Tensor::new(Shape::new(r, c), data)
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn rows(&self) -> usize {
        self.shape.rows
    }

    pub fn cols(&self) -> usize {
        self.shape.cols
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.shape.cols + col]
    }

    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        self.data[row * self.shape.cols + col] = value;
    }

    pub fn column(&self, col: usize) -> Vec<f64> {
        (0..self.shape.rows).map(|r| self.get(r, col)).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn matmul(&self, other: &Tensor) -> Result<Tensor> {
        if self.cols() != other.rows() {
            return Err(Error::shape(
                "matmul",
                format!("{} x {}", self.shape, other.shape),
            ));
        }
        let mut out = vec![0.0; self.rows() * other.cols()];
        matmul_into(
            &self.data,
            &other.data,
            &mut out,
            self.rows(),
            self.cols(),
            other.cols(),
        );
        Tensor::new(Shape::new(self.rows(), other.cols()), out)
    }

    pub fn transpose(&self) -> Tensor {
        let (r, c) = (self.rows(), self.cols());
        let mut data = vec![0.0; r * c];
        for i in 0..r {
            for j in 0..c {
                data[j * r + i] = self.data[i * c + j];
            }
        }
        Tensor {
            shape: Shape::new(c, r),
            data,
        }
    }
}

/// `out = a (r x k) * b (k x c)`, overwriting `out`.
pub(crate) fn matmul_into(a: &[f64], b: &[f64], out: &mut [f64], r: usize, k: usize, c: usize) {
    if c == 1 {
        for (i, o) in out.iter_mut().enumerate() {
            *o = dot(&a[i * k..(i + 1) * k], b);
        }
        return;
    }
    out.iter_mut().for_each(|v| *v = 0.0);
    for i in 0..r {
        let row = &mut out[i * c..(i + 1) * c];
        for (p, &aip) in a[i * k..(i + 1) * k].iter().enumerate() {
            if aip == 0.0 {
                continue;
            }
            let brow = &b[p * c..(p + 1) * c];
            for (o, &bv) in row.iter_mut().zip(brow) {
                *o += aip * bv;
            }
        }
    }
}

/// Dot product with four interleaved partial sums. Term `i` always lands
/// in partial sum `i mod 4`, so appending zero terms never changes the
/// result.
#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [0.0f64; 4];
    let mut ca = a.chunks_exact(4);
    let mut cb = b.chunks_exact(4);
    for (x, y) in (&mut ca).zip(&mut cb) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    for (j, (x, y)) in ca.remainder().iter().zip(cb.remainder()).enumerate() {
        acc[j] += x * y;
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_lengths() {
        assert!(Tensor::new(Shape::new(2, 2), vec![1.0; 3]).is_err());
        assert!(Tensor::new(Shape::new(0, 2), vec![]).is_err());
    }

    #[test]
    fn from_columns_is_column_major_input() {
        let t = Tensor::from_columns(&[vec![1.0, 2.0], vec![3.0, 4.0], vec![5.0, 6.0]]).unwrap();
        assert_eq!(t.shape(), Shape::new(2, 3));
        assert_eq!(t.data(), &[1.0, 3.0, 5.0, 2.0, 4.0, 6.0]);
        assert_eq!(t.column(1), vec![3.0, 4.0]);
        assert_eq!(t.transpose().transpose(), t);
    }

    #[test]
    fn matmul_identity() {
        let v = Tensor::vector(&[1.5, -2.0, 0.25]);
        assert_eq!(Tensor::identity(3).matmul(&v).unwrap(), v);
        let a = Tensor::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        let b = Tensor::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        assert_eq!(a.matmul(&b).unwrap().data(), &[2.0, 1.0, 4.0, 3.0]);
    }
}
