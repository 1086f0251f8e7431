use super::LinearOperator;
use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::scalar::Scalar;
use crate::tensor::{ImageBuffer, Shape};

/// Per-pixel keep flags, one plane shared by all channels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SamplingMask {
    width: usize,
    height: usize,
    keep: Vec<bool>,
}

impl SamplingMask {
    pub fn new(width: usize, height: usize, keep: Vec<bool>) -> Result<Self> {
        if keep.len() != width * height {
            return Err(Error::invalid(format!(
                "mask for {width}x{height} needs {} flags, got {}",
                width * height,
                keep.len()
            )));
        }
        if !keep.iter().any(|&k| k) {
            return Err(Error::invalid("mask must keep at least one pixel"));
        }
        Ok(SamplingMask {
            width,
            height,
            keep,
        })
    }

    pub fn all(width: usize, height: usize) -> Self {
        SamplingMask {
            width,
            height,
            keep: vec![true; width * height],
        }
    }

    /// Masks exactly `floor(fraction * W * H)` pixels chosen uniformly.
    pub fn random(width: usize, height: usize, fraction: f64, rng: &mut Rng) -> Result<Self> {
        if !(0.0..1.0).contains(&fraction) {
            return Err(Error::invalid(format!(
                "masked fraction must lie in [0, 1), got {fraction}"
            )));
        }
        let n = width * height;
        let masked = (fraction * n as f64).floor() as usize;
        let mut keep = vec![true; n];
        for i in rng.sample_indices(n, masked) {
            keep[i] = false;
        }
        Self::new(width, height, keep)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn keep_flags(&self) -> &[bool] {
        &self.keep
    }

    pub fn kept(&self) -> usize {
        self.keep.iter().filter(|&&k| k).count()
    }

    pub fn masked(&self) -> usize {
        self.keep.len() - self.kept()
    }

    fn check(&self, shape: Shape) -> Result<()> {
        if shape.width != self.width || shape.height != self.height {
            return Err(Error::ShapeMismatch {
                expected: Shape::new(self.width, self.height, shape.channels),
                found: shape,
            });
        }
        Ok(())
    }
}

/// Zeroes masked pixels in every channel.
pub fn apply_mask<T: Scalar>(mask: &SamplingMask, x: &ImageBuffer<T>) -> Result<ImageBuffer<T>> {
    mask.check(x.shape())?;
    let mut out = x.clone();
    for ch in 0..x.shape().channels {
        for (v, &k) in out.plane_mut(ch).iter_mut().zip(&mask.keep) {
            if !k {
                *v = T::zero();
            }
        }
    }
    Ok(out)
}

/// Random-sampling degradation; self-adjoint and idempotent.
#[derive(Debug, Clone)]
pub struct MaskOperator {
    mask: SamplingMask,
    shape: Shape,
}

impl MaskOperator {
    pub fn new(mask: SamplingMask, channels: usize) -> Result<Self> {
        let shape = Shape::new(mask.width, mask.height, channels);
        Ok(MaskOperator { mask, shape })
    }

    pub fn mask(&self) -> &SamplingMask {
        &self.mask
    }
}

impl<T: Scalar> LinearOperator<T> for MaskOperator {
    fn input_shape(&self) -> Shape {
        self.shape
    }
    fn output_shape(&self) -> Shape {
        self.shape
    }
    fn forward(&self, x: &ImageBuffer<T>) -> Result<ImageBuffer<T>> {
        x.ensure_shape(self.shape)?;
        apply_mask(&self.mask, x)
    }
    fn adjoint(&self, y: &ImageBuffer<T>) -> Result<ImageBuffer<T>> {
        self.forward(y)
    }
    fn norm_bound(&self) -> T {
        T::one()
    }
    fn describe(&self) -> String {
        format!("mask({} of {} kept)", self.mask.kept(), self.mask.keep.len())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linops::{adjoint_mismatch, power_iteration};

    #[test]
    fn all_keep_is_identity() {
        let x = Rng::new(1).normal_image::<f64>(Shape::new(4, 3, 3));
        assert_eq!(apply_mask(&SamplingMask::all(4, 3), &x).unwrap(), x);
    }

    #[test]
    fn single_survivor() {
        let mut keep = vec![false; 9];
        keep[4] = true;
        let m = SamplingMask::new(3, 3, keep).unwrap();
        let x = ImageBuffer::<f64>::filled(Shape::gray(3, 3), 2.0);
        let y = apply_mask(&m, &x).unwrap();
        assert_eq!(y.sum(), 2.0);
        assert_eq!(y.get(0, 1, 1), 2.0);
    }

    #[test]
    fn idempotent_and_norm_one() {
        let mut rng = Rng::new(2);
        let m = SamplingMask::random(8, 8, 0.2, &mut rng).unwrap();
        assert_eq!(m.masked(), 12);
        let x = rng.normal_image::<f64>(Shape::gray(8, 8));
        let once = apply_mask(&m, &x).unwrap();
        assert_eq!(apply_mask(&m, &once).unwrap(), once);
        let op = MaskOperator::new(m, 1).unwrap();
        let n: f64 = power_iteration(&op, 20, &mut rng).unwrap();
        assert!((n - 1.0).abs() < 1e-9);
        assert!(adjoint_mismatch::<f64>(&op, 100, &mut rng).unwrap() < 1e-12);
    }

    #[test]
    fn rejects_empty_and_mismatch() {
        assert!(SamplingMask::new(2, 1, vec![false, false]).is_err());
        let m = SamplingMask::all(3, 3);
        assert!(apply_mask(&m, &ImageBuffer::<f64>::zeros(Shape::gray(3, 4))).is_err());
    }

    #[test]
    fn random_mask_is_reproducible() {
        let a = SamplingMask::random(16, 16, 0.2, &mut Rng::new(9)).unwrap();
        let b = SamplingMask::random(16, 16, 0.2, &mut Rng::new(9)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.masked(), 51);
    }
}
