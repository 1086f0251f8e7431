//! Convergent primal-dual plug-and-play image restoration.
//!
//! The crate is organized bottom-up:
//!
//! * [`tensor`], [`rng`]: planar image buffers and a seeded random stream.
//! * [`linops`]: circular blur, random sampling, identity and stacking, with
//!   adjoints and operator-norm tools.
//! * [`prox`]: closed-form proximity operators and the Moreau conjugate wrapper.
//! * [`denoisers`]: the plug-in denoiser `J`, built-in firmly nonexpansive
//!   instances, an empirical firm-nonexpansiveness checker and the client of
//!   the external-denoiser wire protocol.
//! * [`solver`]: primal-dual splitting, its plug-and-play generalization, the
//!   Gaussian and Poisson restoration algorithms, a forward-backward baseline,
//!   a Douglas-Rachford reference solver and the step-size condition checks.
//! * [`degrade`], [`metrics`]: observation simulation and quality metrics.
//!
//! Everything numeric is generic over [`Scalar`]; the aliases below fix it
//! to `f64`, which is what the solvers are tuned for.

pub mod degrade;
pub mod denoisers;
pub mod error;
pub mod linops;
pub mod metrics;
pub mod protocol;
pub mod prox;
pub mod rng;
pub mod scalar;
pub mod solver;
pub mod tensor;
pub mod transform;

pub use error::{Error, Result};
pub use rng::Rng;
pub use scalar::Scalar;
pub use tensor::{axpy, l2_norm, ImageBuffer, Shape};

pub type Image = ImageBuffer<f64>;
pub type Image32 = ImageBuffer<f32>;
pub type Kernel = linops::ConvolutionKernel<f64>;
pub type Operator = linops::SharedOperator<f64>;
pub type SolveOutcome = solver::SolveOutcome<f64>;
