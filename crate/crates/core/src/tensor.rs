//! Dense planar image buffers and the element-wise arithmetic the solvers need.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Width, height and channel count of an image.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Shape {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
}

impl Shape {
    pub const fn new(width: usize, height: usize, channels: usize) -> Self {
        Shape {
            width,
            height,
            channels,
        }
    }

    /// Single-channel shape.
    pub const fn gray(width: usize, height: usize) -> Self {
        Shape::new(width, height, 1)
    }

    /// A flat vector of `n` entries, used by small dense operators.
    pub const fn vector(n: usize) -> Self {
        Shape::new(n, 1, 1)
    }

    pub const fn plane_len(&self) -> usize {
        self.width * self.height
    }

    /// Total number of entries, K in the usual notation.
    pub const fn len(&self) -> usize {
        self.width * self.height * self.channels
    }

    pub const fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}x{}", self.width, self.height, self.channels)
    }
}

/// A real-valued image stored channel-planar, row-major within each plane.
///
/// Index of pixel `(row, col)` in channel `c` is `c * W * H + row * W + col`.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageBuffer<T> {
    shape: Shape,
    data: Vec<T>,
}

impl<T: Scalar> ImageBuffer<T> {
    pub fn new(shape: Shape, data: Vec<T>) -> Result<Self> {
        if data.len() != shape.len() {
            return Err(Error::BadLength {
                shape,
                len: data.len(),
            });
        }
        Ok(ImageBuffer { shape, data })
    }

    pub fn zeros(shape: Shape) -> Self {
        Self::filled(shape, T::zero())
    }

    pub fn filled(shape: Shape, value: T) -> Self {
        ImageBuffer {
            shape,
            data: vec![value; shape.len()],
        }
    }

    /// Builds an image from `f(channel, row, col)`.
    pub fn from_fn(shape: Shape, mut f: impl FnMut(usize, usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(shape.len());
        for c in 0..shape.channels {
            for r in 0..shape.height {
                for col in 0..shape.width {
                    data.push(f(c, r, col));
                }
            }
        }
        ImageBuffer { shape, data }
    }

    /// Convenience constructor for a flat vector.
    pub fn from_vec(data: Vec<T>) -> Self {
        ImageBuffer {
            shape: Shape::vector(data.len()),
            data,
        }
    }

    pub fn from_f64_slice(shape: Shape, values: &[f64]) -> Result<Self> {
        Self::new(shape, values.iter().map(|&v| T::lit(v)).collect())
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    pub fn plane(&self, channel: usize) -> &[T] {
        let n = self.shape.plane_len();
        &self.data[channel * n..(channel + 1) * n]
    }

    pub fn plane_mut(&mut self, channel: usize) -> &mut [T] {
        let n = self.shape.plane_len();
        &mut self.data[channel * n..(channel + 1) * n]
    }

    pub fn get(&self, channel: usize, row: usize, col: usize) -> T {
        self.data[self.index(channel, row, col)]
    }

    pub fn set(&mut self, channel: usize, row: usize, col: usize, value: T) {
        let i = self.index(channel, row, col);
        self.data[i] = value;
    }

    #[inline]
    fn index(&self, channel: usize, row: usize, col: usize) -> usize {
        (channel * self.shape.height + row) * self.shape.width + col
    }

    /// Same data, reinterpreted with another shape of equal length.
    pub fn reshaped(self, shape: Shape) -> Result<Self> {
        Self::new(shape, self.data)
    }

    pub fn ensure_shape(&self, expected: Shape) -> Result<()> {
        if self.shape != expected {
            return Err(Error::ShapeMismatch {
                expected,
                found: self.shape,
            });
        }
        Ok(())
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        ImageBuffer {
            shape: self.shape,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(T, T) -> T) -> Result<Self> {
        other.ensure_shape(self.shape)?;
        Ok(ImageBuffer {
            shape: self.shape,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn scale(&self, a: T) -> Self {
        self.map(|v| a * v)
    }

    pub fn dot(&self, other: &Self) -> Result<T> {
        other.ensure_shape(self.shape)?;
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .fold(T::zero(), |acc, (&a, &b)| acc + a * b))
    }

    pub fn norm_sq(&self) -> T {
        self.data.iter().fold(T::zero(), |acc, &v| acc + v * v)
    }

    pub fn l1_norm(&self) -> T {
        self.data.iter().fold(T::zero(), |acc, &v| acc + v.abs())
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |acc, &v| acc.max(v.abs()))
    }

    pub fn min_value(&self) -> T {
        self.data.iter().copied().fold(T::infinity(), T::min)
    }

    pub fn max_value(&self) -> T {
        self.data.iter().copied().fold(T::neg_infinity(), T::max)
    }

    pub fn sum(&self) -> T {
        self.data.iter().copied().sum()
    }

    pub fn mean(&self) -> T {
        self.sum() / T::from_usize(self.len().max(1)).unwrap()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Euclidean distance to another buffer.
    pub fn distance(&self, other: &Self) -> Result<T> {
        other.ensure_shape(self.shape)?;
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .fold(T::zero(), |acc, (&a, &b)| acc + (a - b) * (a - b))
            .sqrt())
    }

    /// Root-mean-square difference.
    pub fn rmse(&self, other: &Self) -> Result<T> {
        let d = self.distance(other)?;
        Ok(d / T::from_usize(self.len().max(1)).unwrap().sqrt())
    }

    pub fn cast<U: Scalar>(&self) -> ImageBuffer<U> {
        ImageBuffer {
            shape: self.shape,
            data: self
                .data
                .iter()
                .map(|v| U::from_f64(v.as_f64()).unwrap())
                .collect(),
        }
    }

    /// Concatenates the planes of two images with matching spatial size.
    pub fn concat_channels(&self, other: &Self) -> Result<Self> {
        let (a, b) = (self.shape, other.shape);
        if a.width != b.width || a.height != b.height {
            return Err(Error::ShapeMismatch {
                expected: Shape::new(a.width, a.height, b.channels),
                found: b,
            });
        }
        let mut data = Vec::with_capacity(a.len() + b.len());
        data.extend_from_slice(&self.data);
        data.extend_from_slice(&other.data);
        Ok(ImageBuffer {
            shape: Shape::new(a.width, a.height, a.channels + b.channels),
            data,
        })
    }

    /// Splits off the first `channels` planes; inverse of [`concat_channels`](Self::concat_channels).
    pub fn split_channels(&self, channels: usize) -> Result<(Self, Self)> {
        let s = self.shape;
        if channels > s.channels {
            return Err(Error::invalid(format!(
                "cannot split {channels} channels from {s}"
            )));
        }
        let cut = channels * s.plane_len();
        Ok((
            ImageBuffer {
                shape: Shape::new(s.width, s.height, channels),
                data: self.data[..cut].to_vec(),
            },
            ImageBuffer {
                shape: Shape::new(s.width, s.height, s.channels - channels),
                data: self.data[cut..].to_vec(),
            },
        ))
    }
}

/// Returns `a * x + y`.
pub fn axpy<T: Scalar>(a: T, x: &ImageBuffer<T>, y: &ImageBuffer<T>) -> Result<ImageBuffer<T>> {
    x.zip_map(y, |xi, yi| a * xi + yi)
}

/// Euclidean norm of the flattened buffer.
///
/// Uses a scaled accumulation so that very large or very small entries do
/// not overflow or underflow the running sum of squares.
pub fn l2_norm<T: Scalar>(x: &ImageBuffer<T>) -> T {
    let mut scale = T::zero();
    let mut ssq = T::one();
    for &v in x.as_slice() {
        if v != T::zero() {
            let a = v.abs();
            if scale < a {
                let r = scale / a;
                ssq = T::one() + ssq * r * r;
                scale = a;
            } else {
                let r = a / scale;
                ssq = ssq + r * r;
            }
        }
    }
    scale * ssq.sqrt()
}
