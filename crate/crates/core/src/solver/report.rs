use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::conditions::ConditionReport;
use crate::error::Result;
use crate::scalar::Scalar;
use crate::tensor::ImageBuffer;

/// One sampled iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub iteration: usize,
    /// `|x_n - x_{n-1}| / |x_{n-1}|`.
    pub update_rate: f64,
    /// `|(x~_n, y~_n) - (x_{n-1}, y_{n-1})|`.
    pub residual: f64,
    pub psnr: Option<f64>,
    /// `max(0, |Phi x - v| - eps)` for the constrained Gaussian problem.
    pub data_violation: Option<f64>,
    /// Largest distance of a primal entry to the box.
    pub box_violation: Option<f64>,
    /// Wall-clock seconds since the solve started.
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Termination {
    Converged,
    MaxIters,
    Diverged { reason: String },
}

impl Termination {
    /// CLI exit status: 0 converged, 2 iteration cap, 3 diverged.
    pub fn exit_code(&self) -> i32 {
        match self {
            Termination::Converged => 0,
            Termination::MaxIters => 2,
            Termination::Diverged { .. } => 3,
        }
    }
}

/// Result of a solve. On divergence `x` and `duals` hold the last finite state.
#[derive(Debug, Clone)]
pub struct SolveOutcome<T> {
    pub x: ImageBuffer<T>,
    pub duals: Vec<ImageBuffer<T>>,
    pub iterations: usize,
    pub termination: Termination,
    pub trace: Vec<TraceRecord>,
    pub conditions: ConditionReport,
    /// Every `keep_every`-th primal iterate.
    pub trajectory: Vec<ImageBuffer<T>>,
    /// Hit the iteration cap while infeasible with a flat residual.
    pub stalled: bool,
    pub seconds: f64,
}

impl<T: Scalar> SolveOutcome<T> {
    pub fn converged(&self) -> bool {
        self.termination == Termination::Converged
    }

    pub fn condition_violated(&self) -> bool {
        !self.conditions.satisfied
    }

    pub fn last_record(&self) -> Option<&TraceRecord> {
        self.trace.last()
    }

    pub fn report(&self, solver: &str, config: serde_json::Value) -> RunReport {
        RunReport {
            solver: solver.to_string(),
            config,
            conditions: self.conditions.clone(),
            termination: self.termination.clone(),
            exit_code: self.termination.exit_code(),
            iterations: self.iterations,
            stalled: self.stalled,
            seconds: self.seconds,
            seconds_per_iteration: if self.iterations > 0 {
                self.seconds / self.iterations as f64
            } else {
                0.0
            },
            final_record: self.trace.last().cloned(),
            extra: serde_json::Map::new(),
            trace: self.trace.clone(),
        }
    }
}

/// Serializable summary of a run, with its trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub solver: String,
    pub config: serde_json::Value,
    pub conditions: ConditionReport,
    pub termination: Termination,
    pub exit_code: i32,
    pub iterations: usize,
    pub stalled: bool,
    pub seconds: f64,
    pub seconds_per_iteration: f64,
    pub final_record: Option<TraceRecord>,
    /// Free-form additions (statistics of the output image, metrics).
    #[serde(default)]
    pub extra: serde_json::Map<String, serde_json::Value>,
    pub trace: Vec<TraceRecord>,
}

impl RunReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        f.write_all(self.to_json()?.as_bytes())?;
        f.write_all(b"\n")?;
        Ok(())
    }

    /// Trace as CSV; absent optional values are empty cells.
    pub fn write_csv(&self, out: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for r in &self.trace {
            w.serialize(r)?;
        }
        if self.trace.is_empty() {
            w.write_record([
                "iteration",
                "update_rate",
                "residual",
                "psnr",
                "data_violation",
                "box_violation",
                "seconds",
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_csv_file(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::{check_conditions, SolverConfig};

    fn sample() -> RunReport {
        let rec = |i: usize| TraceRecord {
            iteration: i,
            update_rate: 1.0 / (i + 1) as f64,
            residual: 0.5,
            psnr: if i == 0 { None } else { Some(30.0) },
            data_violation: None,
            box_violation: Some(0.0),
            seconds: 0.01 * i as f64,
        };
        RunReport {
            solver: "test".into(),
            config: serde_json::json!({"gamma1": 0.5}),
            conditions: check_conditions(&SolverConfig::default(), 2.0),
            termination: Termination::Diverged { reason: "nan".into() },
            exit_code: 3,
            iterations: 2,
            stalled: false,
            seconds: 0.02,
            seconds_per_iteration: 0.01,
            final_record: Some(rec(1)),
            extra: serde_json::Map::new(),
            trace: vec![rec(0), rec(1)],
        }
    }

    #[test]
    fn json_round_trip() {
        let r = sample();
        assert_eq!(RunReport::from_json(&r.to_json().unwrap()).unwrap(), r);
    }

    #[test]
    fn csv_has_header_and_one_row_per_record() {
        let mut out = Vec::new();
        sample().write_csv(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], "iteration,update_rate,residual,psnr,data_violation,box_violation,seconds");
        assert_eq!(lines.len(), 3);
        assert!(lines[1].starts_with("0,1.0,0.5,,,0.0,"));
    }

    #[test]
    fn exit_codes() {
        assert_eq!(Termination::Converged.exit_code(), 0);
        assert_eq!(Termination::MaxIters.exit_code(), 2);
        assert_eq!(Termination::Diverged { reason: String::new() }.exit_code(), 3);
    }
}
