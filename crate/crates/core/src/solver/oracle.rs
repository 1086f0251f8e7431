//! Reference solver for small convex instances: Douglas-Rachford splitting in
//! the product space, with every term handled through its exact prox.
//!
//! ```text
//! x   = mean(z_i)
//! y_i = prox_{gamma f_i}(2x - z_i)
//! z_i = z_i + y_i - x
//! ```

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::linops::{ConvolutionKernel, SamplingMask};
use crate::prox::{L1Dct, ProxFn, Quadratic};
use crate::tensor::{ImageBuffer, Shape};
use crate::transform::Fft2;

/// A linear operator diagonalized by a known orthogonal change of basis.
#[derive(Debug, Clone)]
pub enum DiagonalOperator {
    Identity,
    /// Circular convolution, diagonal in the Fourier domain.
    Circulant(ConvolutionKernel<f64>),
    /// Pixel sampling, diagonal in the pixel domain.
    Mask(SamplingMask),
}

#[derive(Debug, Clone)]
pub enum OracleTerm {
    /// `weight * |DCT x|_1`
    L1Dct { weight: f64 },
    /// `(weight / 2) |x - center|^2`
    Quadratic { center: ImageBuffer<f64>, weight: f64 },
    /// Indicator of `[lo, hi]^K`.
    Box { lo: f64, hi: f64 },
    /// Indicator of `{x : |A x - v| <= radius}`.
    DataBall {
        op: DiagonalOperator,
        observation: ImageBuffer<f64>,
        radius: f64,
    },
}

#[derive(Debug, Clone)]
pub struct DrOptions {
    pub gamma: f64,
    /// Bound on `|z_{k+1} - z_k|` at termination.
    pub tol: f64,
    pub max_iters: usize,
    /// Starting point for every copy; zero by default.
    pub x0: Option<ImageBuffer<f64>>,
}

impl Default for DrOptions {
    fn default() -> Self {
        DrOptions {
            gamma: 1.0,
            tol: 1e-10,
            max_iters: 500_000,
            x0: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct DrSolution {
    pub x: ImageBuffer<f64>,
    pub iterations: usize,
    pub residual: f64,
}

/// Projection onto an ellipsoidal data ball in the operator's eigenbasis.
struct BallProjector {
    shape: Shape,
    fft: Option<Fft2<f64>>,
    symbol: Vec<Complex<f64>>,
    /// `A^T v`-free data: the observation in the eigenbasis.
    obs: Vec<Complex<f64>>,
    /// `|x|^2 = weight * sum |X_k|^2`.
    weight: f64,
    radius: f64,
}

impl BallProjector {
    fn new(op: &DiagonalOperator, observation: &ImageBuffer<f64>, radius: f64, shape: Shape) -> Result<Self> {
        observation.ensure_shape(shape)?;
        if !(radius >= 0.0) {
            return Err(Error::invalid("ball radius must be nonnegative"));
        }
        let plane = shape.plane_len();
        let (fft, symbol_plane, weight) = match op {
            DiagonalOperator::Identity => (None, vec![Complex::new(1.0, 0.0); plane], 1.0),
            DiagonalOperator::Mask(m) => {
                if m.width() != shape.width || m.height() != shape.height {
                    return Err(Error::invalid("mask does not match the image grid"));
                }
                let sym = m
                    .keep_flags()
                    .iter()
                    .map(|&k| Complex::new(if k { 1.0 } else { 0.0 }, 0.0))
                    .collect();
                (None, sym, 1.0)
            }
            DiagonalOperator::Circulant(k) => (
                Some(Fft2::new(shape.width, shape.height)),
                k.spectrum(shape)?,
                1.0 / plane as f64,
            ),
        };
        let mut p = BallProjector {
            shape,
            fft,
            symbol: Vec::new(),
            obs: Vec::new(),
            weight,
            radius,
        };
        for _ in 0..shape.channels {
            p.symbol.extend_from_slice(&symbol_plane);
        }
        p.obs = p.analyze(observation);
        Ok(p)
    }

    fn analyze(&self, x: &ImageBuffer<f64>) -> Vec<Complex<f64>> {
        let mut out = Vec::with_capacity(x.len());
        for ch in 0..self.shape.channels {
            match &self.fft {
                Some(fft) => out.extend(fft.forward_real(x.plane(ch))),
                None => out.extend(x.plane(ch).iter().map(|&v| Complex::new(v, 0.0))),
            }
        }
        out
    }

    fn synthesize(&self, coeffs: Vec<Complex<f64>>) -> ImageBuffer<f64> {
        let plane = self.shape.plane_len();
        let mut out = ImageBuffer::zeros(self.shape);
        for ch in 0..self.shape.channels {
            let block = coeffs[ch * plane..(ch + 1) * plane].to_vec();
            match &self.fft {
                Some(fft) => out.plane_mut(ch).copy_from_slice(&fft.inverse_real(block)),
                None => {
                    for (d, c) in out.plane_mut(ch).iter_mut().zip(block) {
                        *d = c.re;
                    }
                }
            }
        }
        out
    }

    fn project(&self, x: &ImageBuffer<f64>) -> Result<ImageBuffer<f64>> {
        let xs = self.analyze(x);
        let r0: Vec<Complex<f64>> = xs
            .iter()
            .zip(&self.symbol)
            .zip(&self.obs)
            .map(|((x, k), v)| k * x - v)
            .collect();
        let eps2 = self.radius * self.radius;
        let sq = |mu: f64| -> f64 {
            self.weight
                * r0.iter()
                    .zip(&self.symbol)
                    .map(|(r, k)| r.norm_sqr() / (1.0 + mu * k.norm_sqr()).powi(2))
                    .sum::<f64>()
        };
        if sq(0.0) <= eps2 {
            return Ok(x.clone());
        }
        let floor: f64 = self.weight
            * r0.iter()
                .zip(&self.symbol)
                .filter(|(_, k)| k.norm_sqr() == 0.0)
                .map(|(r, _)| r.norm_sqr())
                .sum::<f64>();
        if floor >= eps2 {
            return Err(Error::invalid("data ball does not meet the operator's range"));
        }
        let mut hi = 1.0;
        while sq(hi) > eps2 {
            hi *= 2.0;
            if !hi.is_finite() {
                return Err(Error::invalid("data-ball multiplier search overflowed"));
            }
        }
        let mut lo = 0.0;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if sq(mid) > eps2 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let mu = hi;
        let z = xs
            .iter()
            .zip(&self.symbol)
            .zip(&self.obs)
            .map(|((x, k), v)| (x + k.conj() * v * mu) / (1.0 + mu * k.norm_sqr()))
            .collect();
        Ok(self.synthesize(z))
    }
}

enum Prepared {
    L1(L1Dct<f64>),
    Quad(Quadratic<f64>),
    Box(f64, f64),
    Ball(BallProjector),
}

impl Prepared {
    fn prox(&self, gamma: f64, x: &ImageBuffer<f64>) -> Result<ImageBuffer<f64>> {
        match self {
            Prepared::L1(f) => f.prox(gamma, x),
            Prepared::Quad(f) => f.prox(gamma, x),
            Prepared::Box(lo, hi) => Ok(x.map(|v| v.max(*lo).min(*hi))),
            Prepared::Ball(p) => p.project(x),
        }
    }
}

fn prepare(term: &OracleTerm, shape: Shape) -> Result<Prepared> {
    Ok(match term {
        OracleTerm::L1Dct { weight } => Prepared::L1(L1Dct::new(*weight, shape)?),
        OracleTerm::Quadratic { center, weight } => {
            center.ensure_shape(shape)?;
            Prepared::Quad(Quadratic::new(center.clone(), *weight)?)
        }
        OracleTerm::Box { lo, hi } => {
            if !(lo < hi) {
                return Err(Error::invalid("box needs lo < hi"));
            }
            Prepared::Box(*lo, *hi)
        }
        OracleTerm::DataBall {
            op,
            observation,
            radius,
        } => Prepared::Ball(BallProjector::new(op, observation, *radius, shape)?),
    })
}

/// Minimizes the sum of `terms` over images of `shape`.
pub fn dr_oracle_solve(terms: &[OracleTerm], shape: Shape, opts: &DrOptions) -> Result<DrSolution> {
    if terms.is_empty() {
        return Err(Error::invalid("oracle needs at least one term"));
    }
    if !(opts.gamma > 0.0) {
        return Err(Error::invalid("oracle step must be positive"));
    }
    let prepared = terms.iter().map(|t| prepare(t, shape)).collect::<Result<Vec<_>>>()?;
    let start = match &opts.x0 {
        Some(x0) => {
            x0.ensure_shape(shape)?;
            x0.clone()
        }
        None => ImageBuffer::zeros(shape),
    };
    let m = prepared.len() as f64;
    let mut z: Vec<ImageBuffer<f64>> = vec![start; prepared.len()];
    for k in 1..=opts.max_iters {
        let mut x = ImageBuffer::zeros(shape);
        for zi in &z {
            x = x.add(zi)?;
        }
        let x = x.scale(1.0 / m);
        let mut res2 = 0.0;
        for (zi, p) in z.iter_mut().zip(&prepared) {
            let reflected = x.zip_map(zi, |a, b| 2.0 * a - b)?;
            let yi = p.prox(opts.gamma, &reflected)?;
            let step = yi.sub(&x)?;
            res2 += step.norm_sq();
            *zi = zi.add(&step)?;
        }
        let residual = res2.sqrt();
        if residual <= opts.tol {
            let mut x = ImageBuffer::zeros(shape);
            for zi in &z {
                x = x.add(zi)?;
            }
            return Ok(DrSolution {
                x: x.scale(1.0 / m),
                iterations: k,
                residual,
            });
        }
    }
    Err(Error::IterationCap(opts.max_iters))
}

/// Sum of the term values at `x`; indicators contribute 0 inside and `+inf`
/// outside (with a relative slack of `1e-9`).
pub fn oracle_objective(terms: &[OracleTerm], x: &ImageBuffer<f64>) -> Result<f64> {
    let shape = x.shape();
    let mut total = 0.0;
    for t in terms {
        total += match t {
            OracleTerm::L1Dct { weight } => L1Dct::new(*weight, shape)?.value(x)?,
            OracleTerm::Quadratic { center, weight } => Quadratic::new(center.clone(), *weight)?.value(x)?,
            OracleTerm::Box { lo, hi } => {
                if x.min_value() < lo - 1e-9 || x.max_value() > hi + 1e-9 {
                    f64::INFINITY
                } else {
                    0.0
                }
            }
            OracleTerm::DataBall { op, observation, radius } => {
                let p = BallProjector::new(op, observation, *radius, shape)?;
                let xs = p.analyze(x);
                let r2: f64 = p.weight
                    * xs.iter()
                        .zip(&p.symbol)
                        .zip(&p.obs)
                        .map(|((x, k), v)| (k * x - v).norm_sqr())
                        .sum::<f64>();
                if r2.sqrt() > radius * (1.0 + 1e-9) + 1e-12 {
                    f64::INFINITY
                } else {
                    0.0
                }
            }
        };
    }
    Ok(total)
}
