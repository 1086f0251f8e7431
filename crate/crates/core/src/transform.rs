//! Per-plane 2-D transforms: complex FFT for circulant operators and the
//! orthonormal DCT-II used by the sparsity denoiser.

use std::sync::Arc;

use num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::scalar::Scalar;

/// Forward/inverse 2-D FFT on a fixed `height x width` grid.
pub struct Fft2<T: Scalar> {
    width: usize,
    height: usize,
    row_fwd: Arc<dyn Fft<T>>,
    row_inv: Arc<dyn Fft<T>>,
    col_fwd: Arc<dyn Fft<T>>,
    col_inv: Arc<dyn Fft<T>>,
}

impl<T: Scalar> Fft2<T> {
    pub fn new(width: usize, height: usize) -> Self {
        let mut planner = FftPlanner::new();
        Fft2 {
            width,
            height,
            row_fwd: planner.plan_fft_forward(width),
            row_inv: planner.plan_fft_inverse(width),
            col_fwd: planner.plan_fft_forward(height),
            col_inv: planner.plan_fft_inverse(height),
        }
    }

    pub fn forward_real(&self, plane: &[T]) -> Vec<Complex<T>> {
        let mut buf: Vec<Complex<T>> = plane.iter().map(|&v| Complex::new(v, T::zero())).collect();
        self.forward(&mut buf);
        buf
    }

    /// Unnormalized forward transform in place.
    pub fn forward(&self, buf: &mut [Complex<T>]) {
        self.apply(buf, &self.row_fwd, &self.col_fwd);
    }

    /// Inverse transform in place, including the `1/(W*H)` factor.
    pub fn inverse(&self, buf: &mut [Complex<T>]) {
        self.apply(buf, &self.row_inv, &self.col_inv);
        let n = T::from_usize(self.width * self.height).unwrap();
        for v in buf.iter_mut() {
            *v = *v / n;
        }
    }

    pub fn inverse_real(&self, mut buf: Vec<Complex<T>>) -> Vec<T> {
        self.inverse(&mut buf);
        buf.into_iter().map(|c| c.re).collect()
    }

    fn apply(&self, buf: &mut [Complex<T>], rows: &Arc<dyn Fft<T>>, cols: &Arc<dyn Fft<T>>) {
        let (w, h) = (self.width, self.height);
        debug_assert_eq!(buf.len(), w * h);
        rows.process(buf);
        let mut column = vec![Complex::new(T::zero(), T::zero()); h];
        for c in 0..w {
            for r in 0..h {
                column[r] = buf[r * w + c];
            }
            cols.process(&mut column);
            for r in 0..h {
                buf[r * w + c] = column[r];
            }
        }
    }
}

/// Orthonormal 2-D DCT-II (and its inverse, the DCT-III) on a fixed grid.
#[derive(Debug, Clone)]
pub struct Dct2<T> {
    width: usize,
    height: usize,
    // basis[k * n + i] = c_k cos(pi (2i + 1) k / 2n)
    row_basis: Vec<T>,
    col_basis: Vec<T>,
}

impl<T: Scalar> Dct2<T> {
    pub fn new(width: usize, height: usize) -> Self {
        Dct2 {
            width,
            height,
            row_basis: dct_basis(width),
            col_basis: dct_basis(height),
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn forward(&self, plane: &[T]) -> Vec<T> {
        let tmp = apply_rows(plane, self.width, self.height, &self.row_basis, false);
        apply_cols(&tmp, self.width, self.height, &self.col_basis, false)
    }

    pub fn inverse(&self, coeffs: &[T]) -> Vec<T> {
        let tmp = apply_cols(coeffs, self.width, self.height, &self.col_basis, true);
        apply_rows(&tmp, self.width, self.height, &self.row_basis, true)
    }
}

fn dct_basis<T: Scalar>(n: usize) -> Vec<T> {
    let nf = n as f64;
    let mut basis = Vec::with_capacity(n * n);
    for k in 0..n {
        let ck = if k == 0 { (1.0 / nf).sqrt() } else { (2.0 / nf).sqrt() };
        for i in 0..n {
            let arg = std::f64::consts::PI * (2 * i + 1) as f64 * k as f64 / (2.0 * nf);
            basis.push(T::lit(ck * arg.cos()));
        }
    }
    basis
}

fn apply_rows<T: Scalar>(src: &[T], w: usize, h: usize, basis: &[T], transpose: bool) -> Vec<T> {
    let mut out = vec![T::zero(); w * h];
    for r in 0..h {
        let row = &src[r * w..(r + 1) * w];
        for k in 0..w {
            let mut acc = T::zero();
            for (i, &v) in row.iter().enumerate() {
                let b = if transpose { basis[i * w + k] } else { basis[k * w + i] };
                acc = acc + b * v;
            }
            out[r * w + k] = acc;
        }
    }
    out
}

fn apply_cols<T: Scalar>(src: &[T], w: usize, h: usize, basis: &[T], transpose: bool) -> Vec<T> {
    let mut out = vec![T::zero(); w * h];
    for k in 0..h {
        for i in 0..h {
            let b = if transpose { basis[i * h + k] } else { basis[k * h + i] };
            if b == T::zero() {
                continue;
            }
            let src_row = &src[i * w..(i + 1) * w];
            let dst_row = &mut out[k * w..(k + 1) * w];
            for (d, &s) in dst_row.iter_mut().zip(src_row) {
                *d = *d + b * s;
            }
        }
    }
    out
}
