//! Parameter heuristics and the tabulated defaults for the two restoration
//! tasks.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Deblur,
    Inpaint,
}

/// Noise levels at which `alpha` is tabulated.
pub const ALPHA_SIGMAS: [f64; 5] = [0.0025, 0.005, 0.01, 0.02, 0.04];
pub const ALPHA_DEBLUR: [f64; 5] = [0.82, 0.86, 0.92, 0.96, 1.00];
pub const ALPHA_INPAINT: [f64; 5] = [0.90, 0.82, 0.82, 1.00, 1.00];

/// Poisson scalings at which `lambda` is tabulated.
pub const LAMBDA_ETAS: [f64; 6] = [1.0, 2.0, 10.0, 50.0, 100.0, 200.0];
pub const LAMBDA_DEBLUR: [f64; 6] = [2.0e-3, 2.0e-3, 1.5e-3, 1.25e-3, 1.25e-3, 1.0e-3];
pub const LAMBDA_INPAINT: [f64; 6] = [1.25e-3, 1.25e-3, 1.0e-3, 7.5e-4, 5.0e-4, 5.0e-4];

/// `sigma_J / (2 sigma |h|)`, the weight heuristic for the l2-penalized
/// forward-backward formulation.
pub fn lambda_opt(sigma_j: f64, sigma: f64, kernel_frobenius: f64) -> Result<f64> {
    if !(sigma > 0.0) || !(kernel_frobenius > 0.0) {
        return Err(Error::invalid(format!(
            "lambda_opt needs sigma > 0 and |h| > 0, got {sigma} and {kernel_frobenius}"
        )));
    }
    if !(sigma_j >= 0.0) {
        return Err(Error::invalid("sigma_J must be nonnegative"));
    }
    Ok(sigma_j / (2.0 * sigma * kernel_frobenius))
}

/// `sigma * sqrt(K)`, the radius of the l2 data ball.
pub fn epsilon_opt(sigma: f64, k: usize) -> Result<f64> {
    if !(sigma >= 0.0) || k == 0 {
        return Err(Error::invalid(format!("epsilon_opt needs sigma >= 0 and K >= 1, got {sigma}, {k}")));
    }
    Ok(sigma * (k as f64).sqrt())
}

/// Index of the tabulated level nearest to `value` on a log scale.
fn nearest(levels: &[f64], value: f64) -> usize {
    let lv = value.ln();
    (0..levels.len())
        .min_by(|&a, &b| (levels[a].ln() - lv).abs().total_cmp(&(levels[b].ln() - lv).abs()))
        .unwrap()
}

/// Multiplier for `epsilon_opt` at the tabulated noise level nearest `sigma`.
pub fn default_alpha(task: Task, sigma: f64) -> Result<f64> {
    if !(sigma > 0.0) {
        return Err(Error::invalid("default alpha needs sigma > 0"));
    }
    let i = nearest(&ALPHA_SIGMAS, sigma);
    Ok(match task {
        Task::Deblur => ALPHA_DEBLUR[i],
        Task::Inpaint => ALPHA_INPAINT[i],
    })
}

/// GKL weight at the tabulated scaling nearest `eta`.
pub fn default_lambda(task: Task, eta: f64) -> Result<f64> {
    if !(eta > 0.0) {
        return Err(Error::invalid("default lambda needs eta > 0"));
    }
    let i = nearest(&LAMBDA_ETAS, eta);
    Ok(match task {
        Task::Deblur => LAMBDA_DEBLUR[i],
        Task::Inpaint => LAMBDA_INPAINT[i],
    })
}

/// Fixed iteration counts: 1200 deblurring / 3000 inpainting, raised to
/// 4800 / 12000 for strong Poisson noise (`eta <= 10`).
pub fn default_iterations(task: Task, poisson_eta: Option<f64>) -> usize {
    let strong = poisson_eta.is_some_and(|eta| eta <= 10.0);
    match (task, strong) {
        (Task::Deblur, false) => 1200,
        (Task::Inpaint, false) => 3000,
        (Task::Deblur, true) => 4800,
        (Task::Inpaint, true) => 12000,
    }
}
