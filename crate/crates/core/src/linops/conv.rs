use std::fmt::Write as _;
use std::path::Path;

use num_complex::Complex;

use super::LinearOperator;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::{ImageBuffer, Shape};
use crate::transform::Fft2;

/// Kernels with more taps than this are applied in the frequency domain.
const SPATIAL_TAP_LIMIT: usize = 9;

/// A 2-D blur kernel with an anchor (the tap that lands on the output pixel).
#[derive(Debug, Clone, PartialEq)]
pub struct ConvolutionKernel<T> {
    height: usize,
    width: usize,
    taps: Vec<T>,
    anchor: (usize, usize),
}

impl<T: Scalar> ConvolutionKernel<T> {
    /// Row-major taps with the anchor at the center (`h/2, w/2`).
    pub fn new(height: usize, width: usize, taps: Vec<T>) -> Result<Self> {
        Self::with_anchor(height, width, taps, (height / 2, width / 2))
    }

    pub fn with_anchor(
        height: usize,
        width: usize,
        taps: Vec<T>,
        anchor: (usize, usize),
    ) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::invalid("kernel must be nonempty"));
        }
        if taps.len() != height * width {
            return Err(Error::invalid(format!(
                "kernel {height}x{width} needs {} taps, got {}",
                height * width,
                taps.len()
            )));
        }
        if taps.iter().any(|t| !t.is_finite()) {
            return Err(Error::invalid("kernel taps must be finite"));
        }
        if anchor.0 >= height || anchor.1 >= width {
            return Err(Error::invalid("kernel anchor outside the kernel"));
        }
        Ok(ConvolutionKernel {
            height,
            width,
            taps,
            anchor,
        })
    }

    pub fn from_f64(height: usize, width: usize, taps: &[f64]) -> Result<Self> {
        Self::new(height, width, taps.iter().map(|&t| T::lit(t)).collect())
    }

    /// The 1x1 unit tap.
    pub fn delta() -> Self {
        ConvolutionKernel {
            height: 1,
            width: 1,
            taps: vec![T::one()],
            anchor: (0, 0),
        }
    }

    /// `size x size` box with unit sum.
    pub fn uniform(size: usize) -> Result<Self> {
        let v = T::one() / T::from_usize(size * size).unwrap();
        Self::new(size, size, vec![v; size * size])
    }

    /// Sampled isotropic Gaussian with unit sum.
    pub fn gaussian(size: usize, sigma: f64) -> Result<Self> {
        if sigma <= 0.0 {
            return Err(Error::invalid("gaussian sigma must be positive"));
        }
        let c = (size / 2) as f64;
        let mut taps = Vec::with_capacity(size * size);
        for r in 0..size {
            for col in 0..size {
                let d2 = (r as f64 - c).powi(2) + (col as f64 - c).powi(2);
                taps.push((-d2 / (2.0 * sigma * sigma)).exp());
            }
        }
        let s: f64 = taps.iter().sum();
        Self::from_f64(size, size, &taps.iter().map(|t| t / s).collect::<Vec<_>>())
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn taps(&self) -> &[T] {
        &self.taps
    }

    pub fn anchor(&self) -> (usize, usize) {
        self.anchor
    }

    pub fn tap(&self, row: usize, col: usize) -> T {
        self.taps[row * self.width + col]
    }

    pub fn tap_count(&self) -> usize {
        self.taps.len()
    }

    pub fn tap_sum(&self) -> T {
        self.taps.iter().copied().sum()
    }

    pub fn frobenius(&self) -> T {
        self.taps.iter().fold(T::zero(), |a, &t| a + t * t).sqrt()
    }

    pub fn scaled(&self, factor: T) -> Self {
        ConvolutionKernel {
            taps: self.taps.iter().map(|&t| t * factor).collect(),
            ..self.clone()
        }
    }

    pub fn taps_f64(&self) -> Vec<f64> {
        self.taps.iter().map(|t| t.as_f64()).collect()
    }

    /// Parses the text format: a `H W` header line, then `H` rows of `W` taps.
    pub fn parse(text: &str) -> Result<Self> {
        let mut tokens = text.split_whitespace();
        let mut dim = |what: &str| -> Result<usize> {
            tokens
                .next()
                .ok_or_else(|| Error::Parse(format!("missing kernel {what}")))?
                .parse::<usize>()
                .map_err(|e| Error::Parse(format!("bad kernel {what}: {e}")))
        };
        let height = dim("height")?;
        let width = dim("width")?;
        let taps = tokens
            .map(|t| {
                t.parse::<f64>()
                    .map_err(|e| Error::Parse(format!("bad kernel tap {t:?}: {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        if taps.len() != height * width {
            return Err(Error::Parse(format!(
                "kernel header says {height}x{width} but {} taps follow",
                taps.len()
            )));
        }
        Self::from_f64(height, width, &taps)
    }

    /// Loads a kernel file, optionally rescaled to unit operator norm on `shape`.
    pub fn load(path: impl AsRef<Path>, normalize_on: Option<Shape>) -> Result<Self> {
        let kernel = Self::parse(&std::fs::read_to_string(path)?)?;
        match normalize_on {
            Some(shape) => normalize_kernel(&kernel, shape),
            None => Ok(kernel),
        }
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("{} {}\n", self.height, self.width);
        for r in 0..self.height {
            let row: Vec<String> = (0..self.width)
                .map(|c| format!("{:.17e}", self.tap(r, c).as_f64()))
                .collect();
            let _ = writeln!(out, "{}", row.join(" "));
        }
        out
    }

    fn check_fits(&self, shape: Shape) -> Result<()> {
        if self.height > shape.height || self.width > shape.width {
            return Err(Error::KernelTooLarge {
                kernel_h: self.height,
                kernel_w: self.width,
                image_h: shape.height,
                image_w: shape.width,
            });
        }
        Ok(())
    }

    /// Kernel wrapped onto the image grid with its anchor at the origin.
    fn padded(&self, shape: Shape) -> Vec<T> {
        let (h, w) = (shape.height, shape.width);
        let mut pad = vec![T::zero(); h * w];
        for a in 0..self.height {
            for b in 0..self.width {
                let r = (a + h - self.anchor.0 % h) % h;
                let c = (b + w - self.anchor.1 % w) % w;
                pad[r * w + c] = pad[r * w + c] + self.tap(a, b);
            }
        }
        pad
    }

    /// Transfer function of the circular convolution on `shape`.
    pub fn spectrum(&self, shape: Shape) -> Result<Vec<Complex<T>>> {
        self.check_fits(shape)?;
        Ok(Fft2::new(shape.width, shape.height).forward_real(&self.padded(shape)))
    }
}

/// Exact operator norm of circular convolution: the largest modulus of the
/// kernel's transfer function on the image grid.
pub fn opnorm_conv<T: Scalar>(kernel: &ConvolutionKernel<T>, shape: Shape) -> Result<T> {
    Ok(kernel
        .spectrum(shape)?
        .iter()
        .fold(T::zero(), |m, c| m.max(c.norm())))
}

/// Rescales a kernel so its circular convolution on `shape` has unit norm.
pub fn normalize_kernel<T: Scalar>(
    kernel: &ConvolutionKernel<T>,
    shape: Shape,
) -> Result<ConvolutionKernel<T>> {
    if kernel.taps.iter().all(|&t| t == T::zero()) {
        return Err(Error::ZeroKernel);
    }
    let norm = opnorm_conv(kernel, shape)?;
    if norm == T::zero() {
        return Err(Error::ZeroKernel);
    }
    Ok(kernel.scaled(T::one() / norm))
}

/// Which implementation a [`Convolution`] uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConvPath {
    Spatial,
    Fourier,
}

/// Per-channel circular convolution on a fixed image shape.
pub struct Convolution<T: Scalar> {
    kernel: ConvolutionKernel<T>,
    shape: Shape,
    path: ConvPath,
    fft: Option<(Fft2<T>, Vec<Complex<T>>)>,
    norm: T,
}

impl<T: Scalar> Convolution<T> {
    /// Picks the spatial path for small kernels and the FFT path otherwise.
    pub fn new(kernel: ConvolutionKernel<T>, shape: Shape) -> Result<Self> {
        let path = if kernel.tap_count() > SPATIAL_TAP_LIMIT {
            ConvPath::Fourier
        } else {
            ConvPath::Spatial
        };
        Self::with_path(kernel, shape, path)
    }

    pub fn with_path(kernel: ConvolutionKernel<T>, shape: Shape, path: ConvPath) -> Result<Self> {
        let spectrum = kernel.spectrum(shape)?;
        let norm = spectrum.iter().fold(T::zero(), |m, c| m.max(c.norm()));
        let fft = match path {
            ConvPath::Fourier => Some((Fft2::new(shape.width, shape.height), spectrum)),
            ConvPath::Spatial => None,
        };
        Ok(Convolution {
            kernel,
            shape,
            path,
            fft,
            norm,
        })
    }

    pub fn kernel(&self) -> &ConvolutionKernel<T> {
        &self.kernel
    }

    pub fn path(&self) -> ConvPath {
        self.path
    }

    fn spatial(&self, x: &ImageBuffer<T>, adjoint: bool) -> ImageBuffer<T> {
        let s = self.shape;
        let (h, w) = (s.height, s.width);
        let k = &self.kernel;
        let (ar, ac) = k.anchor;
        let mut out = ImageBuffer::zeros(s);
        for ch in 0..s.channels {
            let src = x.plane(ch);
            let dst = out.plane_mut(ch);
            for a in 0..k.height {
                for b in 0..k.width {
                    let t = k.tap(a, b);
                    if t == T::zero() {
                        continue;
                    }
                    // forward reads x[r - (a - ar)], the adjoint x[r + (a - ar)]
                    let (dr, dc) = if adjoint {
                        ((a + h - ar % h) % h, (b + w - ac % w) % w)
                    } else {
                        ((ar + h - a % h) % h, (ac + w - b % w) % w)
                    };
                    for r in 0..h {
                        let sr = (r + dr) % h;
                        let src_row = &src[sr * w..(sr + 1) * w];
                        let dst_row = &mut dst[r * w..(r + 1) * w];
                        for (c, d) in dst_row.iter_mut().enumerate() {
                            *d = *d + t * src_row[(c + dc) % w];
                        }
                    }
                }
            }
        }
        out
    }

    fn fourier(&self, x: &ImageBuffer<T>, adjoint: bool) -> ImageBuffer<T> {
        let (fft, spectrum) = self.fft.as_ref().expect("fourier path has a plan");
        let mut out = ImageBuffer::zeros(self.shape);
        for ch in 0..self.shape.channels {
            let mut buf = fft.forward_real(x.plane(ch));
            for (v, k) in buf.iter_mut().zip(spectrum) {
                *v = *v * if adjoint { k.conj() } else { *k };
            }
            out.plane_mut(ch).copy_from_slice(&fft.inverse_real(buf));
        }
        out
    }
}

impl<T: Scalar> LinearOperator<T> for Convolution<T> {
    fn input_shape(&self) -> Shape {
        self.shape
    }
    fn output_shape(&self) -> Shape {
        self.shape
    }
    fn forward(&self, x: &ImageBuffer<T>) -> Result<ImageBuffer<T>> {
        x.ensure_shape(self.shape)?;
        Ok(match self.path {
            ConvPath::Spatial => self.spatial(x, false),
            ConvPath::Fourier => self.fourier(x, false),
        })
    }
    fn adjoint(&self, y: &ImageBuffer<T>) -> Result<ImageBuffer<T>> {
        y.ensure_shape(self.shape)?;
        Ok(match self.path {
            ConvPath::Spatial => self.spatial(y, true),
            ConvPath::Fourier => self.fourier(y, true),
        })
    }
    fn norm_bound(&self) -> T {
        self.norm
    }
    fn describe(&self) -> String {
        format!("circular-conv({}x{})", self.kernel.height, self.kernel.width)
    }
}

/// Circular convolution of every channel of `x` with `kernel`.
pub fn conv_circular<T: Scalar>(
    kernel: &ConvolutionKernel<T>,
    x: &ImageBuffer<T>,
) -> Result<ImageBuffer<T>> {
    Convolution::new(kernel.clone(), x.shape())?.forward(x)
}

/// The kernel bank under `kernels/`, by file stem.
pub const SHIPPED_KERNELS: [(&str, &str); 10] = [
    ("motion_a", include_str!("../../kernels/motion_a.txt")),
    ("motion_b", include_str!("../../kernels/motion_b.txt")),
    ("motion_c", include_str!("../../kernels/motion_c.txt")),
    ("motion_d", include_str!("../../kernels/motion_d.txt")),
    ("motion_e", include_str!("../../kernels/motion_e.txt")),
    ("motion_f", include_str!("../../kernels/motion_f.txt")),
    ("motion_g", include_str!("../../kernels/motion_g.txt")),
    ("motion_h", include_str!("../../kernels/motion_h.txt")),
    ("gaussian_i", include_str!("../../kernels/gaussian_i.txt")),
    ("square_j", include_str!("../../kernels/square_j.txt")),
];

/// Looks up a shipped kernel by stem (`motion_b`) or by its letter (`b`).
pub fn shipped_kernel<T: Scalar>(name: &str) -> Option<ConvolutionKernel<T>> {
    SHIPPED_KERNELS
        .iter()
        .find(|(stem, _)| *stem == name || stem.rsplit('_').next() == Some(name))
        .map(|(_, text)| ConvolutionKernel::parse(text).expect("shipped kernels parse"))
}
