use super::LinearOperator;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::{ImageBuffer, Shape};

/// Small dense matrix acting on flat vectors; used in tests and examples.
#[derive(Debug, Clone)]
pub struct DenseMatrix<T> {
    rows: usize,
    cols: usize,
    entries: Vec<T>,
    norm: T,
}

impl<T: Scalar> DenseMatrix<T> {
    /// Row-major entries. The norm bound is the Frobenius norm.
    pub fn new(rows: usize, cols: usize, entries: Vec<T>) -> Result<Self> {
        if entries.len() != rows * cols {
            return Err(Error::invalid("dense matrix entry count mismatch"));
        }
        let norm = entries.iter().fold(T::zero(), |a, &v| a + v * v).sqrt();
        Ok(DenseMatrix {
            rows,
            cols,
            entries,
            norm,
        })
    }

    pub fn entry(&self, r: usize, c: usize) -> T {
        self.entries[r * self.cols + c]
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }
}

impl<T: Scalar> LinearOperator<T> for DenseMatrix<T> {
    fn input_shape(&self) -> Shape {
        Shape::vector(self.cols)
    }
    fn output_shape(&self) -> Shape {
        Shape::vector(self.rows)
    }
    fn forward(&self, x: &ImageBuffer<T>) -> Result<ImageBuffer<T>> {
        x.ensure_shape(Shape::vector(self.cols))?;
        let xs = x.as_slice();
        Ok(ImageBuffer::from_vec(
            (0..self.rows)
                .map(|r| (0..self.cols).fold(T::zero(), |a, c| a + self.entry(r, c) * xs[c]))
                .collect(),
        ))
    }
    fn adjoint(&self, y: &ImageBuffer<T>) -> Result<ImageBuffer<T>> {
        y.ensure_shape(Shape::vector(self.rows))?;
        let ys = y.as_slice();
        Ok(ImageBuffer::from_vec(
            (0..self.cols)
                .map(|c| (0..self.rows).fold(T::zero(), |a, r| a + self.entry(r, c) * ys[r]))
                .collect(),
        ))
    }
    fn norm_bound(&self) -> T {
        self.norm
    }
    fn describe(&self) -> String {
        format!("dense({}x{})", self.rows, self.cols)
    }
}
