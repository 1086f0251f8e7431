//! Primal-dual splitting and its plug-and-play generalization.
//!
//! Both solve `min f(x) + g(x) + h(Lx)` by
//!
//! ```text
//! x~ = P(x - gamma1 (grad f(x) + L* y))
//! y~ = prox_{gamma2 h*}(y + gamma2 L (2 x~ - x))
//! (x, y) <- rho_n (x~, y~) + (1 - rho_n) (x, y)
//! ```
//!
//! with `P = prox_{gamma1 g}` for [`pds_solve`] and `P = J` for
//! [`pnp_pds_solve`].

use std::time::Instant;

use log::{debug, warn};

use super::conditions::{check_conditions, ConditionReport};
use super::config::SolverConfig;
use super::report::{SolveOutcome, Termination, TraceRecord};
use crate::denoisers::Denoiser;
use crate::error::{Error, Result};
use crate::linops::SharedOperator;
use crate::prox::{ProxFn, Quadratic};
use crate::scalar::Scalar;
use crate::tensor::{l2_norm, ImageBuffer};

/// A differentiable term with Lipschitz-continuous gradient.
pub trait SmoothTerm<T: Scalar>: Send + Sync {
    fn gradient(&self, x: &ImageBuffer<T>) -> Result<ImageBuffer<T>>;
    /// Lipschitz constant of the gradient.
    fn lipschitz(&self) -> f64;
    fn describe(&self) -> String;
}

impl<T: Scalar> SmoothTerm<T> for Quadratic<T> {
    fn gradient(&self, x: &ImageBuffer<T>) -> Result<ImageBuffer<T>> {
        let w = self.weight();
        x.zip_map(self.center(), |a, c| w * (a - c))
    }
    fn lipschitz(&self) -> f64 {
        self.weight().as_f64()
    }
    fn describe(&self) -> String {
        ProxFn::describe(self)
    }
}

/// `(weight / 2) |Phi x - v|^2`.
pub struct LeastSquares<T: Scalar> {
    op: SharedOperator<T>,
    observation: ImageBuffer<T>,
    weight: T,
}

impl<T: Scalar> LeastSquares<T> {
    pub fn new(op: SharedOperator<T>, observation: ImageBuffer<T>, weight: T) -> Result<Self> {
        observation.ensure_shape(op.output_shape())?;
        if !(weight > T::zero()) {
            return Err(Error::invalid("least-squares weight must be positive"));
        }
        Ok(LeastSquares {
            op,
            observation,
            weight,
        })
    }
}

impl<T: Scalar> SmoothTerm<T> for LeastSquares<T> {
    fn gradient(&self, x: &ImageBuffer<T>) -> Result<ImageBuffer<T>> {
        let r = self.op.forward(x)?.sub(&self.observation)?;
        Ok(self.op.adjoint(&r)?.scale(self.weight))
    }
    fn lipschitz(&self) -> f64 {
        let n = self.op.norm_bound().as_f64();
        self.weight.as_f64() * n * n
    }
    fn describe(&self) -> String {
        format!("{}/2*|{} x - v|^2", self.weight, self.op.describe())
    }
}

/// `min f(x) + g(x) + h(Lx)`; `g` enters through the primal step and `h`
/// through the prox of its conjugate.
pub struct PdsProblem<T: Scalar> {
    pub smooth: Option<Box<dyn SmoothTerm<T>>>,
    pub op: SharedOperator<T>,
    /// The prox of `h*`; wrap a primal `h` in [`crate::prox::Conjugate`].
    pub h_conj: Box<dyn ProxFn<T>>,
    pub x0: ImageBuffer<T>,
    /// Defaults to zero.
    pub y0: Option<ImageBuffer<T>>,
    /// Bound on `|L|^2` for the condition check; defaults to the operator's
    /// own norm bound squared.
    pub norm_bound_sq: Option<f64>,
}

impl<T: Scalar> PdsProblem<T> {
    pub fn new(op: SharedOperator<T>, h_conj: Box<dyn ProxFn<T>>, x0: ImageBuffer<T>) -> Self {
        PdsProblem {
            smooth: None,
            op,
            h_conj,
            x0,
            y0: None,
            norm_bound_sq: None,
        }
    }

    pub fn with_smooth(mut self, f: Box<dyn SmoothTerm<T>>) -> Self {
        self.smooth = Some(f);
        self
    }

    pub fn with_y0(mut self, y0: ImageBuffer<T>) -> Self {
        self.y0 = Some(y0);
        self
    }

    pub fn norm_sq(&self) -> f64 {
        self.norm_bound_sq.unwrap_or_else(|| {
            let n = self.op.norm_bound().as_f64();
            n * n
        })
    }

    /// Step-size conditions, with `beta` raised to the smooth term's constant.
    pub fn conditions(&self, cfg: &SolverConfig) -> ConditionReport {
        let mut cfg = cfg.clone();
        if let Some(f) = &self.smooth {
            cfg.beta = cfg.beta.max(f.lipschitz());
        }
        check_conditions(&cfg, self.norm_sq())
    }
}

/// Called at every recorded iteration to fill the optional trace fields.
pub type Probe<'a, T> = dyn FnMut(&ImageBuffer<T>, &mut TraceRecord) -> Result<()> + 'a;

pub(crate) fn admit(report: &ConditionReport, strict: bool) -> Result<()> {
    if report.satisfied {
        return Ok(());
    }
    if strict {
        Err(Error::ConditionViolated(report.summary()))
    } else {
        warn!("running despite violated conditions: {}", report.summary());
        Ok(())
    }
}

/// Classical primal-dual splitting with `g` given by its prox.
pub fn pds_solve<T: Scalar>(
    problem: &PdsProblem<T>,
    g: &dyn ProxFn<T>,
    cfg: &SolverConfig,
) -> Result<SolveOutcome<T>> {
    let gamma1 = T::lit(cfg.gamma1);
    let mut primal = |v: &ImageBuffer<T>| g.prox(gamma1, v);
    run(problem, cfg, &mut primal, &mut |_, _| Ok(()))
}

/// Plug-and-play primal-dual splitting with denoiser `j` in place of the prox.
pub fn pnp_pds_solve<T: Scalar>(
    problem: &PdsProblem<T>,
    j: &mut dyn Denoiser<T>,
    cfg: &SolverConfig,
) -> Result<SolveOutcome<T>> {
    pnp_pds_solve_with(problem, j, cfg, &mut |_, _| Ok(()))
}

pub fn pnp_pds_solve_with<T: Scalar>(
    problem: &PdsProblem<T>,
    j: &mut dyn Denoiser<T>,
    cfg: &SolverConfig,
    probe: &mut Probe<'_, T>,
) -> Result<SolveOutcome<T>> {
    if !j.declared_fne() {
        warn!("denoiser {} does not claim firm nonexpansiveness", j.descriptor());
    }
    let mut primal = |v: &ImageBuffer<T>| j.denoise(v);
    run(problem, cfg, &mut primal, probe)
}

fn run<T: Scalar>(
    problem: &PdsProblem<T>,
    cfg: &SolverConfig,
    primal: &mut dyn FnMut(&ImageBuffer<T>) -> Result<ImageBuffer<T>>,
    probe: &mut Probe<'_, T>,
) -> Result<SolveOutcome<T>> {
    cfg.validate()?;
    let conditions = problem.conditions(cfg);
    admit(&conditions, cfg.strict)?;

    let op = &problem.op;
    problem.x0.ensure_shape(op.input_shape())?;
    let mut x = problem.x0.clone();
    let mut y = match &problem.y0 {
        Some(y0) => {
            y0.ensure_shape(op.output_shape())?;
            y0.clone()
        }
        None => ImageBuffer::zeros(op.output_shape()),
    };
    let gamma1 = T::lit(cfg.gamma1);
    let gamma2 = T::lit(cfg.gamma2);
    let two = T::two();

    let start = Instant::now();
    let mut trace = Vec::new();
    let mut trajectory = Vec::new();
    if cfg.keep_every > 0 {
        trajectory.push(x.clone());
    }
    let mut termination = Termination::MaxIters;
    let mut iterations = 0;

    for n in 1..=cfg.max_iters {
        let lty = op.adjoint(&y)?;
        let arg = match &problem.smooth {
            Some(f) => {
                let dir = f.gradient(&x)?.add(&lty)?;
                x.zip_map(&dir, |a, d| a - gamma1 * d)?
            }
            None => x.zip_map(&lty, |a, d| a - gamma1 * d)?,
        };
        let xt = primal(&arg)?;
        xt.ensure_shape(x.shape())?;
        let bar = xt.zip_map(&x, |a, b| two * a - b)?;
        let lbar = op.forward(&bar)?;
        let yarg = y.zip_map(&lbar, |a, b| a + gamma2 * b)?;
        let yt = problem.h_conj.prox(gamma2, &yarg)?;
        yt.ensure_shape(y.shape())?;

        let dx = xt.distance(&x)?.as_f64();
        let dy = yt.distance(&y)?.as_f64();
        let residual = dx.hypot(dy);

        let rho = cfg.relaxation.at(n - 1);
        let (xn, yn) = if rho == 1.0 {
            (xt, yt)
        } else {
            let r = T::lit(rho);
            let s = T::one() - r;
            (
                xt.zip_map(&x, |a, b| r * a + s * b)?,
                yt.zip_map(&y, |a, b| r * a + s * b)?,
            )
        };

        let norm_x = l2_norm(&x).as_f64();
        let step = xn.distance(&x)?.as_f64();
        let rate = if norm_x > 0.0 { step / norm_x } else { step };

        let diverged = if !xn.is_finite() || !yn.is_finite() {
            Some("non-finite entry in the iterate".to_string())
        } else if norm_x > 0.0 && rate > cfg.divergence_rate {
            Some(format!("update rate {rate:.3e} exceeds {:.1e}", cfg.divergence_rate))
        } else if xn.max_abs().as_f64() > cfg.divergence_bound {
            Some(format!(
                "primal magnitude {:.3e} exceeds {:.1e}",
                xn.max_abs().as_f64(),
                cfg.divergence_bound
            ))
        } else {
            None
        };
        if let Some(reason) = diverged {
            debug!("diverged at iteration {n}: {reason}");
            termination = Termination::Diverged {
                reason: format!("iteration {n}: {reason}"),
            };
            break;
        }

        x = xn;
        y = yn;
        iterations = n;
        if cfg.keep_every > 0 && n % cfg.keep_every == 0 {
            trajectory.push(x.clone());
        }

        let scale = l2_norm(&x).as_f64().hypot(l2_norm(&y).as_f64()).max(1.0);
        let converged = rate < cfg.stop_tol && residual <= cfg.stop_tol * scale;
        if n % cfg.record_every == 0 || converged || n == cfg.max_iters {
            let mut record = TraceRecord {
                iteration: n,
                update_rate: rate,
                residual,
                psnr: None,
                data_violation: None,
                box_violation: None,
                seconds: start.elapsed().as_secs_f64(),
            };
            probe(&x, &mut record)?;
            trace.push(record);
        }
        if converged {
            termination = Termination::Converged;
            break;
        }
    }

    Ok(SolveOutcome {
        x,
        duals: vec![y],
        iterations,
        termination,
        trace,
        conditions,
        trajectory,
        stalled: false,
        seconds: start.elapsed().as_secs_f64(),
    })
}
