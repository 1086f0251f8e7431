//! Linear operators with forward, adjoint and an operator-norm bound.
//!
//! Every operator here maps between [`ImageBuffer`]s of fixed shapes. The
//! solvers only ever see the [`LinearOperator`] trait; the concrete types
//! are the degradations (circular blur, random sampling), the identity,
//! and the vertical stack used to build `L = (Phi, I)`.

mod conv;
mod dense;
mod mask;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use conv::{
    conv_circular, normalize_kernel, opnorm_conv, shipped_kernel, ConvPath, Convolution, ConvolutionKernel,
    SHIPPED_KERNELS,
};
pub use dense::DenseMatrix;
pub use mask::{apply_mask, MaskOperator, SamplingMask};

use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::scalar::Scalar;
use crate::tensor::{l2_norm, ImageBuffer, Shape};

pub trait LinearOperator<T: Scalar>: Send + Sync {
    fn input_shape(&self) -> Shape;
    fn output_shape(&self) -> Shape;
    fn forward(&self, x: &ImageBuffer<T>) -> Result<ImageBuffer<T>>;
    fn adjoint(&self, y: &ImageBuffer<T>) -> Result<ImageBuffer<T>>;
    /// Upper bound on the operator norm; exact for every shipped operator
    /// except [`Stacked`].
    fn norm_bound(&self) -> T;
    fn describe(&self) -> String;
}

pub type SharedOperator<T> = Arc<dyn LinearOperator<T>>;

#[derive(Debug, Clone, Copy)]
pub struct Identity {
    shape: Shape,
}

impl Identity {
    pub fn new(shape: Shape) -> Self {
        Identity { shape }
    }
}

impl<T: Scalar> LinearOperator<T> for Identity {
    fn input_shape(&self) -> Shape {
        self.shape
    }
    fn output_shape(&self) -> Shape {
        self.shape
    }
    fn forward(&self, x: &ImageBuffer<T>) -> Result<ImageBuffer<T>> {
        x.ensure_shape(self.shape)?;
        Ok(x.clone())
    }
    fn adjoint(&self, y: &ImageBuffer<T>) -> Result<ImageBuffer<T>> {
        y.ensure_shape(self.shape)?;
        Ok(y.clone())
    }
    fn norm_bound(&self) -> T {
        T::one()
    }
    fn describe(&self) -> String {
        "identity".into()
    }
}

/// The zero map between two shapes.
#[derive(Debug, Clone, Copy)]
pub struct ZeroOperator {
    input: Shape,
    output: Shape,
}

impl ZeroOperator {
    pub fn new(input: Shape, output: Shape) -> Self {
        ZeroOperator { input, output }
    }
}

impl<T: Scalar> LinearOperator<T> for ZeroOperator {
    fn input_shape(&self) -> Shape {
        self.input
    }
    fn output_shape(&self) -> Shape {
        self.output
    }
    fn forward(&self, x: &ImageBuffer<T>) -> Result<ImageBuffer<T>> {
        x.ensure_shape(self.input)?;
        Ok(ImageBuffer::zeros(self.output))
    }
    fn adjoint(&self, y: &ImageBuffer<T>) -> Result<ImageBuffer<T>> {
        y.ensure_shape(self.output)?;
        Ok(ImageBuffer::zeros(self.input))
    }
    fn norm_bound(&self) -> T {
        T::zero()
    }
    fn describe(&self) -> String {
        "zero".into()
    }
}

/// `x -> (A x, B x)`, with outputs concatenated along the channel axis.
pub struct Stacked<T: Scalar> {
    top: SharedOperator<T>,
    bottom: SharedOperator<T>,
    output: Shape,
}

impl<T: Scalar> Stacked<T> {
    /// Channels of the `top` output come first in the stacked output.
    pub fn top_channels(&self) -> usize {
        self.top.output_shape().channels
    }
}

/// Stacks two operators sharing an input space.
///
/// The norm bound is `sqrt(|A|^2 + |B|^2)`, which is tight when the two
/// blocks share a top singular vector (e.g. a unit-norm blur over the identity).
pub fn stack<T: Scalar>(top: SharedOperator<T>, bottom: SharedOperator<T>) -> Result<Stacked<T>> {
    if top.input_shape() != bottom.input_shape() {
        return Err(Error::ShapeMismatch {
            expected: top.input_shape(),
            found: bottom.input_shape(),
        });
    }
    let (a, b) = (top.output_shape(), bottom.output_shape());
    if a.width != b.width || a.height != b.height {
        return Err(Error::invalid(format!(
            "stacked outputs must share spatial size, got {a} and {b}"
        )));
    }
    Ok(Stacked {
        output: Shape::new(a.width, a.height, a.channels + b.channels),
        top,
        bottom,
    })
}

impl<T: Scalar> LinearOperator<T> for Stacked<T> {
    fn input_shape(&self) -> Shape {
        self.top.input_shape()
    }
    fn output_shape(&self) -> Shape {
        self.output
    }
    fn forward(&self, x: &ImageBuffer<T>) -> Result<ImageBuffer<T>> {
        self.top.forward(x)?.concat_channels(&self.bottom.forward(x)?)
    }
    fn adjoint(&self, y: &ImageBuffer<T>) -> Result<ImageBuffer<T>> {
        y.ensure_shape(self.output)?;
        let (y1, y2) = y.split_channels(self.top_channels())?;
        self.top.adjoint(&y1)?.add(&self.bottom.adjoint(&y2)?)
    }
    fn norm_bound(&self) -> T {
        let (a, b) = (self.top.norm_bound(), self.bottom.norm_bound());
        (a * a + b * b).sqrt()
    }
    fn describe(&self) -> String {
        format!("stack({}, {})", self.top.describe(), self.bottom.describe())
    }
}

/// Estimate of the operator norm by power iteration on `A^T A`.
///
/// Runs at most `iters` steps and stops early once the estimate changes by
/// less than `1e-9` relative. The estimate `|A x_k|` with unit `x_k` is
/// nondecreasing in `k`.
pub fn power_iteration<T: Scalar>(
    op: &dyn LinearOperator<T>,
    iters: usize,
    rng: &mut Rng,
) -> Result<T> {
    power_iteration_tol(op, iters, 1e-9, rng)
}

pub fn power_iteration_tol<T: Scalar>(
    op: &dyn LinearOperator<T>,
    iters: usize,
    rel_tol: f64,
    rng: &mut Rng,
) -> Result<T> {
    if iters == 0 {
        return Err(Error::invalid("power iteration needs at least one step"));
    }
    let shape = op.input_shape();
    let tol = T::lit(rel_tol);
    let mut x = unit_start(shape, rng);
    let mut estimate = T::zero();
    let mut resamples = 0;
    let mut k = 0;
    while k < iters {
        let ax = op.forward(&x)?;
        let next = l2_norm(&ax);
        let z = op.adjoint(&ax)?;
        let nz = l2_norm(&z);
        if nz == T::zero() {
            // start vector in the null space: resample a few times, then the
            // operator is taken to be zero
            if k == 0 && resamples < 3 {
                resamples += 1;
                x = unit_start(shape, rng);
                continue;
            }
            return Ok(next.max(estimate));
        }
        x = z.scale(T::one() / nz);
        let converged = (next - estimate).abs() <= tol * next;
        estimate = next.max(estimate);
        if converged {
            break;
        }
        k += 1;
    }
    Ok(estimate)
}

fn unit_start<T: Scalar>(shape: Shape, rng: &mut Rng) -> ImageBuffer<T> {
    loop {
        let x = rng.normal_image::<T>(shape);
        let n = l2_norm(&x);
        if n > T::zero() {
            return x.scale(T::one() / n);
        }
    }
}

/// Serializable recipe for a degradation operator, stored in sidecar files
/// so that an observation can be restored without re-specifying its model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OperatorSpec {
    Identity,
    Blur {
        height: usize,
        width: usize,
        taps: Vec<f64>,
        /// Rescale to unit operator norm on the image grid before use.
        normalize: bool,
    },
    Mask {
        /// Fraction of pixels removed.
        masked_fraction: f64,
        seed: u64,
    },
}

impl OperatorSpec {
    pub fn build<T: Scalar>(&self, shape: Shape) -> Result<SharedOperator<T>> {
        Ok(match self {
            OperatorSpec::Identity => Arc::new(Identity::new(shape)),
            OperatorSpec::Blur {
                height,
                width,
                taps,
                normalize,
            } => {
                let mut kernel = ConvolutionKernel::from_f64(*height, *width, taps)?;
                if *normalize {
                    kernel = normalize_kernel(&kernel, shape)?;
                }
                Arc::new(Convolution::new(kernel, shape)?)
            }
            OperatorSpec::Mask {
                masked_fraction,
                seed,
            } => {
                let mask = SamplingMask::random(
                    shape.width,
                    shape.height,
                    *masked_fraction,
                    &mut Rng::new(*seed),
                )?;
                Arc::new(MaskOperator::new(mask, shape.channels)?)
            }
        })
    }

    pub fn is_blur(&self) -> bool {
        matches!(self, OperatorSpec::Blur { .. })
    }
}

/// Largest `|<Ax, y> - <x, A*y>| / (|x||y|)` over `trials` random pairs.
pub fn adjoint_mismatch<T: Scalar>(
    op: &dyn LinearOperator<T>,
    trials: usize,
    rng: &mut Rng,
) -> Result<f64> {
    let mut worst = 0.0f64;
    for _ in 0..trials {
        let x = rng.normal_image::<T>(op.input_shape());
        let y = rng.normal_image::<T>(op.output_shape());
        let lhs = op.forward(&x)?.dot(&y)?;
        let rhs = x.dot(&op.adjoint(&y)?)?;
        let scale = (l2_norm(&x) * l2_norm(&y)).as_f64();
        worst = worst.max((lhs - rhs).as_f64().abs() / scale);
    }
    Ok(worst)
}
