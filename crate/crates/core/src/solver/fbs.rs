//! Plug-and-play forward-backward splitting for
//! `min (lambda/2) |Phi x - v|^2 + R_J(x)`:
//!
//! ```text
//! x <- J(x - gamma lambda Phi* (Phi x - v))
//! ```
//!
//! It is run as the primal-dual iteration with a zero linear operator, so its
//! condition (i) reads `gamma lambda |Phi|^2 < 2`.

use std::sync::Arc;

use super::conditions::check_fbs_condition;
use super::config::SolverConfig;
use super::pds::{pnp_pds_solve, LeastSquares, PdsProblem};
use super::report::SolveOutcome;
use crate::denoisers::Denoiser;
use crate::error::{Error, Result};
use crate::linops::{SharedOperator, ZeroOperator};
use crate::prox::{Conjugate, ZeroFn};
use crate::scalar::Scalar;
use crate::tensor::ImageBuffer;

/// `cfg.gamma1` is the step `gamma`; `cfg.gamma2` is unused.
pub fn pnp_fbs_solve<T: Scalar>(
    op: SharedOperator<T>,
    observation: &ImageBuffer<T>,
    lambda: f64,
    j: &mut dyn Denoiser<T>,
    cfg: &SolverConfig,
) -> Result<SolveOutcome<T>> {
    if !(lambda > 0.0) {
        return Err(Error::invalid(format!("lambda must be positive, got {lambda}")));
    }
    let shape = op.input_shape();
    let x0 = if observation.shape() == shape {
        observation.clone()
    } else {
        op.adjoint(observation)?
    };
    let norm = op.norm_bound().as_f64();
    let fidelity = LeastSquares::new(op, observation.clone(), T::lit(lambda))?;
    let problem = PdsProblem::new(Arc::new(ZeroOperator::new(shape, shape)), Box::new(Conjugate(ZeroFn)), x0)
        .with_smooth(Box::new(fidelity));
    let report = check_fbs_condition(cfg.gamma1, lambda, norm * norm);
    let mut out = pnp_pds_solve(&problem, j, cfg)?;
    out.conditions = report;
    out.duals.clear();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::denoisers::{DctSoftThreshold, IdentityDenoiser};
    use crate::linops::{normalize_kernel, Convolution, ConvolutionKernel, Identity};
    use crate::rng::Rng;
    use crate::tensor::Shape;

    #[test]
    fn identity_problem_converges_to_observation() {
        let shape = Shape::gray(6, 6);
        let v = Rng::new(1).uniform_image::<f64>(shape, 0.0, 1.0);
        let op: SharedOperator<f64> = Arc::new(Identity::new(shape));
        let cfg = SolverConfig { gamma1: 0.5, max_iters: 200, stop_tol: 1e-12, ..SolverConfig::default() };
        let out = pnp_fbs_solve(op, &v, 1.0, &mut IdentityDenoiser, &cfg).unwrap();
        assert!(out.x.distance(&v).unwrap() < 1e-10);
        assert!(!out.condition_violated());
    }

    #[test]
    fn lambda_above_bound_is_flagged() {
        let shape = Shape::gray(6, 6);
        let v = Rng::new(2).uniform_image::<f64>(shape, 0.0, 1.0);
        let op: SharedOperator<f64> = Arc::new(Identity::new(shape));
        let strict = SolverConfig { gamma1: 1.0, max_iters: 5, ..SolverConfig::default() };
        assert!(matches!(
            pnp_fbs_solve(op.clone(), &v, 2.587, &mut IdentityDenoiser, &strict),
            Err(Error::ConditionViolated(_))
        ));
        let loose = SolverConfig { strict: false, ..strict };
        let out = pnp_fbs_solve(op, &v, 2.587, &mut IdentityDenoiser, &loose).unwrap();
        assert!(out.condition_violated());
        assert_eq!(out.conditions.first_violated.as_deref(), Some("fbs-step"));
    }

    #[test]
    fn deblurring_with_prox_denoiser_converges() {
        let shape = Shape::gray(12, 12);
        let k = normalize_kernel(&ConvolutionKernel::gaussian(5, 1.0).unwrap(), shape).unwrap();
        let op: SharedOperator<f64> = Arc::new(Convolution::new(k, shape).unwrap());
        let u = ImageBuffer::from_fn(shape, |_, r, c| ((r + c) % 5) as f64 / 5.0);
        let v = op.forward(&u).unwrap();
        let cfg = SolverConfig { gamma1: 1.0, max_iters: 5000, stop_tol: 1e-9, ..SolverConfig::default() };
        let out = pnp_fbs_solve(op, &v, 1.5, &mut DctSoftThreshold::new(1e-3).unwrap(), &cfg).unwrap();
        assert!(out.converged());
    }
}
