use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relaxation parameters `rho_n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relaxation {
    Constant(f64),
    /// Explicit values; the last one repeats forever.
    Sequence(Vec<f64>),
}

impl Relaxation {
    pub fn at(&self, n: usize) -> f64 {
        match self {
            Relaxation::Constant(rho) => *rho,
            Relaxation::Sequence(values) => values[n.min(values.len() - 1)],
        }
    }

    pub fn values(&self) -> &[f64] {
        match self {
            Relaxation::Constant(rho) => std::slice::from_ref(rho),
            Relaxation::Sequence(values) => values,
        }
    }

    pub fn is_unit(&self) -> bool {
        self.values().iter().all(|&r| r == 1.0)
    }
}

impl Default for Relaxation {
    fn default() -> Self {
        Relaxation::Constant(1.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub gamma1: f64,
    pub gamma2: f64,
    pub relaxation: Relaxation,
    /// Lipschitz constant of the smooth term's gradient; 0 without one.
    pub beta: f64,
    pub max_iters: usize,
    /// Stop once both the update rate and the relative fixed-point residual
    /// fall below this.
    pub stop_tol: f64,
    /// Trace sampling interval, in iterations.
    pub record_every: usize,
    /// Refuse to run when the step-size conditions fail.
    pub strict: bool,
    /// Abort once any primal entry exceeds this magnitude.
    pub divergence_bound: f64,
    /// Abort once the update rate exceeds this.
    pub divergence_rate: f64,
    /// Keep every k-th primal iterate (0 keeps none).
    pub keep_every: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            gamma1: 0.5,
            gamma2: 0.99,
            relaxation: Relaxation::default(),
            beta: 0.0,
            max_iters: 1200,
            stop_tol: 1e-6,
            record_every: 1,
            strict: true,
            divergence_bound: 1e6,
            divergence_rate: 1e3,
            keep_every: 0,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::invalid(format!("{name} must be positive and finite, got {v}")))
            }
        };
        positive("gamma1", self.gamma1)?;
        positive("gamma2", self.gamma2)?;
        positive("divergence_bound", self.divergence_bound)?;
        positive("divergence_rate", self.divergence_rate)?;
        if !(self.beta >= 0.0) || !self.beta.is_finite() {
            return Err(Error::invalid(format!("beta must be nonnegative, got {}", self.beta)));
        }
        if self.max_iters == 0 {
            return Err(Error::invalid("max_iters must be at least 1"));
        }
        if !(self.stop_tol >= 0.0) {
            return Err(Error::invalid("stop_tol must be nonnegative"));
        }
        if self.record_every == 0 {
            return Err(Error::invalid("record_every must be at least 1"));
        }
        let values = self.relaxation.values();
        if values.is_empty() {
            return Err(Error::invalid("relaxation sequence is empty"));
        }
        if values.iter().any(|r| !r.is_finite()) {
            return Err(Error::invalid("relaxation values must be finite"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sequence_repeats_its_last_value() {
        let r = Relaxation::Sequence(vec![1.5, 1.2, 1.0]);
        assert_eq!(r.at(0), 1.5);
        assert_eq!(r.at(2), 1.0);
        assert_eq!(r.at(1000), 1.0);
        assert!(Relaxation::Constant(1.0).is_unit());
        assert!(!r.is_unit());
    }

    #[test]
    fn defaults_and_validation() {
        let cfg = SolverConfig::default();
        assert_eq!((cfg.gamma1, cfg.gamma2), (0.5, 0.99));
        assert!(cfg.validate().is_ok());
        for bad in [
            SolverConfig { gamma1: 0.0, ..cfg.clone() },
            SolverConfig { gamma2: -1.0, ..cfg.clone() },
            SolverConfig { beta: -0.1, ..cfg.clone() },
            SolverConfig { max_iters: 0, ..cfg.clone() },
            SolverConfig { record_every: 0, ..cfg.clone() },
            SolverConfig { relaxation: Relaxation::Sequence(vec![]), ..cfg.clone() },
        ] {
            assert!(bad.validate().is_err(), "{bad:?}");
        }
    }

    #[test]
    fn json_fills_missing_fields_with_defaults() {
        let cfg: SolverConfig = serde_json::from_str(r#"{"gamma1": 0.4, "relaxation": {"constant": 0.5}}"#).unwrap();
        assert_eq!(cfg.gamma1, 0.4);
        assert_eq!(cfg.gamma2, 0.99);
        assert_eq!(cfg.relaxation, Relaxation::Constant(0.5));
    }
}
