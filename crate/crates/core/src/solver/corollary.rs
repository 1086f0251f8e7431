//! The three-block instance with `L = (Phi, I)`: Gaussian restoration under
//! an l2-ball data constraint, or Poisson restoration with a weighted GKL
//! fidelity, plus the box `[lo, hi]^K`.
//!
//! ```text
//! u~   = J(u - gamma1 (Phi* w1 + w2))
//! w1~  = w1 + gamma2 Phi (2u~ - u);  w1 <- w1~ - gamma2 D(w1~ / gamma2)
//! w2~  = w2 + gamma2 (2u~ - u);      w2 <- w2~ - gamma2 P_box(w2~ / gamma2)
//! ```
//!
//! where `D` is the projection onto the data ball, or the prox of
//! `(lambda / gamma2) GKL_v` in the Poisson case.

use std::sync::Arc;

use super::config::SolverConfig;
use super::pds::{pnp_pds_solve_with, PdsProblem};
use super::report::{SolveOutcome, Termination, TraceRecord};
use crate::denoisers::Denoiser;
use crate::error::{Error, Result};
use crate::linops::{stack, Identity, SharedOperator};
use crate::metrics::psnr;
use crate::prox::{Ball2Spec, BoxIndicator, Conjugate, GklSpec, ProxFn, SeparableSum};
use crate::scalar::Scalar;
use crate::tensor::ImageBuffer;

#[derive(Debug, Clone)]
pub enum DataFidelity<T> {
    /// `|Phi x - v| <= radius`
    Ball {
        observation: ImageBuffer<T>,
        radius: T,
    },
    /// `lambda * GKL_v(Phi x)` with scaling `eta`; `v` holds raw counts.
    Gkl {
        observation: ImageBuffer<T>,
        eta: T,
        lambda: T,
    },
}

impl<T: Scalar> DataFidelity<T> {
    pub fn observation(&self) -> &ImageBuffer<T> {
        match self {
            DataFidelity::Ball { observation, .. } | DataFidelity::Gkl { observation, .. } => observation,
        }
    }
}

pub struct CorollaryProblem<T: Scalar> {
    pub op: SharedOperator<T>,
    pub data: DataFidelity<T>,
    pub bounds: (T, T),
    /// Defaults to the observation (divided by `eta` for Poisson), mapped
    /// through `Phi*` when the shapes differ.
    pub x0: Option<ImageBuffer<T>>,
    /// Ground truth for the PSNR column of the trace.
    pub reference: Option<ImageBuffer<T>>,
}

impl<T: Scalar> CorollaryProblem<T> {
    pub fn gaussian(op: SharedOperator<T>, observation: ImageBuffer<T>, radius: T) -> Result<Self> {
        observation.ensure_shape(op.output_shape())?;
        Ball2Spec::new(observation.clone(), radius)?;
        Ok(Self::with_data(op, DataFidelity::Ball { observation, radius }))
    }

    pub fn poisson(op: SharedOperator<T>, counts: ImageBuffer<T>, eta: T, lambda: T) -> Result<Self> {
        counts.ensure_shape(op.output_shape())?;
        GklSpec::new(counts.clone(), eta, lambda)?;
        Ok(Self::with_data(
            op,
            DataFidelity::Gkl {
                observation: counts,
                eta,
                lambda,
            },
        ))
    }

    fn with_data(op: SharedOperator<T>, data: DataFidelity<T>) -> Self {
        CorollaryProblem {
            op,
            data,
            bounds: (T::zero(), T::one()),
            x0: None,
            reference: None,
        }
    }

    pub fn with_bounds(mut self, lo: T, hi: T) -> Result<Self> {
        BoxIndicator::new(lo, hi)?;
        self.bounds = (lo, hi);
        Ok(self)
    }

    pub fn with_x0(mut self, x0: ImageBuffer<T>) -> Self {
        self.x0 = Some(x0);
        self
    }

    pub fn with_reference(mut self, reference: ImageBuffer<T>) -> Self {
        self.reference = Some(reference);
        self
    }

    /// `|Phi|^2 + 1`, the bound on `|L|^2` used by the condition check.
    pub fn norm_bound_sq(&self) -> f64 {
        let n = self.op.norm_bound().as_f64();
        n * n + 1.0
    }

    pub fn initial_point(&self) -> Result<ImageBuffer<T>> {
        if let Some(x0) = &self.x0 {
            x0.ensure_shape(self.op.input_shape())?;
            return Ok(x0.clone());
        }
        let v = self.data.observation();
        let base = if v.shape() == self.op.input_shape() {
            v.clone()
        } else {
            self.op.adjoint(v)?
        };
        Ok(match &self.data {
            DataFidelity::Ball { .. } => base,
            DataFidelity::Gkl { eta, .. } => base.scale(T::one() / *eta),
        })
    }

    /// `max(0, |Phi x - v| - radius)`; `None` for the Poisson fidelity.
    pub fn data_violation(&self, x: &ImageBuffer<T>) -> Result<Option<f64>> {
        match &self.data {
            DataFidelity::Ball { observation, radius } => {
                let d = self.op.forward(x)?.distance(observation)?;
                Ok(Some((d - *radius).max(T::zero()).as_f64()))
            }
            DataFidelity::Gkl { .. } => Ok(None),
        }
    }

    pub fn box_violation(&self, x: &ImageBuffer<T>) -> f64 {
        let (lo, hi) = self.bounds;
        BoxIndicator::new(lo, hi)
            .map(|b| b.violation(x).as_f64())
            .unwrap_or(f64::NAN)
    }

    fn to_pds(&self) -> Result<PdsProblem<T>> {
        let shape = self.op.input_shape();
        let out = self.op.output_shape();
        if out.width != shape.width || out.height != shape.height {
            return Err(Error::invalid(format!(
                "the three-block solver needs an image-to-image operator, got {shape} -> {out}"
            )));
        }
        let identity: SharedOperator<T> = Arc::new(Identity::new(shape));
        let l = stack(self.op.clone(), identity)?;
        let split = l.top_channels();
        let data: Box<dyn ProxFn<T>> = match &self.data {
            DataFidelity::Ball { observation, radius } => {
                Box::new(Conjugate(Ball2Spec::new(observation.clone(), *radius)?))
            }
            DataFidelity::Gkl {
                observation,
                eta,
                lambda,
            } => Box::new(Conjugate(GklSpec::new(observation.clone(), *eta, *lambda)?)),
        };
        let (lo, hi) = self.bounds;
        let h_conj = SeparableSum::new(data, Box::new(Conjugate(BoxIndicator::new(lo, hi)?)), split);
        let mut problem = PdsProblem::new(Arc::new(l), Box::new(h_conj), self.initial_point()?);
        problem.norm_bound_sq = Some(self.norm_bound_sq());
        Ok(problem)
    }
}

/// Runs the three-block plug-and-play iteration. The returned duals are
/// `[w1, w2]`.
pub fn corollary_solve<T: Scalar>(
    problem: &CorollaryProblem<T>,
    j: &mut dyn Denoiser<T>,
    cfg: &SolverConfig,
) -> Result<SolveOutcome<T>> {
    let pds = problem.to_pds()?;
    let split = problem.op.output_shape().channels;
    let mut probe = |x: &ImageBuffer<T>, rec: &mut TraceRecord| -> Result<()> {
        rec.data_violation = problem.data_violation(x)?;
        rec.box_violation = Some(problem.box_violation(x));
        if let Some(r) = &problem.reference {
            rec.psnr = Some(psnr(x, r, 1.0)?);
        }
        Ok(())
    };
    let mut out = pnp_pds_solve_with(&pds, j, cfg, &mut probe)?;
    let y = out.duals.pop().expect("one stacked dual");
    let (w1, w2) = y.split_channels(split)?;
    out.duals = vec![w1, w2];
    out.stalled = detect_stall(&out.trace, &out.termination);
    Ok(out)
}

const STALL_FEASIBILITY: f64 = 1e-6;

/// Iteration cap reached while infeasible, with the residual no longer
/// improving over the last tenth of the trace.
pub(crate) fn detect_stall(trace: &[TraceRecord], termination: &Termination) -> bool {
    if *termination != Termination::MaxIters || trace.len() < 10 {
        return false;
    }
    let last = trace.last().unwrap();
    let infeasible = last.data_violation.unwrap_or(0.0) > STALL_FEASIBILITY
        || last.box_violation.unwrap_or(0.0) > STALL_FEASIBILITY;
    if !infeasible {
        return false;
    }
    let cut = trace.len() - trace.len() / 10;
    let before = trace[..cut].iter().map(|r| r.residual).fold(f64::INFINITY, f64::min);
    let after = trace[cut..].iter().map(|r| r.residual).fold(f64::INFINITY, f64::min);
    after >= 0.9 * before
}
