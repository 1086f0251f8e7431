//! Observation simulation: `v = N(Phi u)` with Gaussian or Poisson noise.

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linops::{OperatorSpec, SharedOperator};
use crate::rng::Rng;
use crate::scalar::Scalar;
use crate::tensor::ImageBuffer;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NoiseSpec {
    None,
    Gaussian { sigma: f64 },
    /// Raw counts `Poisson(eta * [Phi u]_i)`.
    Poisson { eta: f64 },
}

impl NoiseSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            NoiseSpec::None => Ok(()),
            NoiseSpec::Gaussian { sigma } if sigma >= 0.0 && sigma.is_finite() => Ok(()),
            NoiseSpec::Gaussian { sigma } => Err(Error::invalid(format!("sigma must be >= 0, got {sigma}"))),
            NoiseSpec::Poisson { eta } if eta > 0.0 && eta.is_finite() => Ok(()),
            NoiseSpec::Poisson { eta } => Err(Error::invalid(format!("eta must be > 0, got {eta}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DegradationSpec {
    pub operator: OperatorSpec,
    pub noise: NoiseSpec,
    /// Seed of the noise stream; masks carry their own seed.
    pub seed: u64,
}

/// Applies `op` and the noise model. Gaussian noise on a sampling mask is
/// drawn only at observed pixels, so unobserved entries of `v` stay zero.
pub fn degrade<T: Scalar>(
    u: &ImageBuffer<T>,
    op: &SharedOperator<T>,
    noise: NoiseSpec,
    masked: bool,
    rng: &mut Rng,
) -> Result<ImageBuffer<T>> {
    noise.validate()?;
    if u.min_value() < T::zero() || u.max_value() > T::one() {
        warn!("degrading an image outside [0, 1]");
    }
    let clean = op.forward(u)?;
    match noise {
        NoiseSpec::None => Ok(clean),
        NoiseSpec::Gaussian { sigma } => {
            if sigma == 0.0 {
                return Ok(clean);
            }
            let mut n = rng.normal_image::<T>(clean.shape()).scale(T::lit(sigma));
            if masked {
                n = op.forward(&n)?;
            }
            clean.add(&n)
        }
        NoiseSpec::Poisson { eta } => {
            if clean.min_value() < T::zero() {
                warn!("negative Poisson means clamped to zero");
            }
            let counts = clean
                .as_slice()
                .iter()
                .map(|m| T::lit(poisson_sample(rng, (m.as_f64() * eta).max(0.0))))
                .collect();
            ImageBuffer::new(clean.shape(), counts)
        }
    }
}

/// Builds the operator from `spec` and degrades `u` with a stream seeded by
/// `spec.seed`.
pub fn degrade_with_spec<T: Scalar>(
    u: &ImageBuffer<T>,
    spec: &DegradationSpec,
) -> Result<(ImageBuffer<T>, SharedOperator<T>)> {
    let op = spec.operator.build::<T>(u.shape())?;
    let masked = matches!(spec.operator, OperatorSpec::Mask { .. });
    let v = degrade(u, &op, spec.noise, masked, &mut Rng::new(spec.seed))?;
    Ok((v, op))
}

const KNUTH_LIMIT: f64 = 30.0;

/// One Poisson draw: Knuth's product method below mean 30, a rounded normal
/// approximation above.
pub fn poisson_sample(rng: &mut Rng, mean: f64) -> f64 {
    if !(mean > 0.0) {
        return 0.0;
    }
    if mean < KNUTH_LIMIT {
        let limit = (-mean).exp();
        let mut k = 0u64;
        let mut p = 1.0;
        loop {
            p *= rng.uniform();
            if p <= limit {
                return k as f64;
            }
            k += 1;
        }
    }
    (mean + mean.sqrt() * rng.normal() + 0.5).floor().max(0.0)
}
