//! Step-size and relaxation conditions for (plug-and-play) primal-dual splitting.

use serde::{Deserialize, Serialize};

use super::config::SolverConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Clause {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
    pub note: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub satisfied: bool,
    pub norm_bound_sq: f64,
    pub beta: f64,
    /// Upper bound on the relaxation parameters; NaN when (i) fails.
    pub delta: f64,
    pub clauses: Vec<Clause>,
    pub first_violated: Option<String>,
}

impl ConditionReport {
    pub fn clause(&self, name: &str) -> Option<&Clause> {
        self.clauses.iter().find(|c| c.name == name)
    }

    pub fn summary(&self) -> String {
        match &self.first_violated {
            None => format!("conditions hold (delta = {})", self.delta),
            Some(name) => {
                let c = self.clause(name).expect("violated clause is listed");
                format!("clause {name} fails: {} vs {} ({})", c.lhs, c.rhs, c.note)
            }
        }
    }

    fn finish(mut self) -> Self {
        self.first_violated = self.clauses.iter().find(|c| !c.holds).map(|c| c.name.clone());
        self.satisfied = self.first_violated.is_none();
        self
    }
}

/// Evaluates, for a bound `norm_bound_sq >= |L|^2`:
///
/// * (i)   `1/gamma1 - gamma2 |L|^2 > beta / 2`
/// * (ii)  every `rho_n` lies in `(0, delta)`, with
///   `delta = 2 - (beta/2) (1/gamma1 - gamma2 |L|^2)^-1` (`delta = 2` if `beta = 0`)
/// * (iii) `sum rho_n (delta - rho_n) = inf`, which holds whenever the
///   repeating tail value lies in `(0, delta)`.
pub fn check_conditions(cfg: &SolverConfig, norm_bound_sq: f64) -> ConditionReport {
    let mut clauses = Vec::new();
    let steps_ok = cfg.gamma1 > 0.0 && cfg.gamma2 > 0.0 && cfg.beta >= 0.0 && norm_bound_sq >= 0.0;
    clauses.push(Clause {
        name: "positivity".into(),
        lhs: cfg.gamma1.min(cfg.gamma2),
        rhs: 0.0,
        holds: steps_ok,
        note: "gamma1, gamma2 > 0, beta >= 0, |L|^2 bound >= 0".into(),
    });

    let margin = 1.0 / cfg.gamma1 - cfg.gamma2 * norm_bound_sq;
    let half_beta = cfg.beta / 2.0;
    let step_ok = margin > half_beta;
    clauses.push(Clause {
        name: "(i)".into(),
        lhs: margin,
        rhs: half_beta,
        holds: step_ok,
        note: "1/gamma1 - gamma2 |L|^2 > beta/2".into(),
    });

    let delta = if cfg.beta == 0.0 {
        2.0
    } else if step_ok {
        2.0 - half_beta / margin
    } else {
        f64::NAN
    };

    let values = cfg.relaxation.values();
    let (lo, hi) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &r| (lo.min(r), hi.max(r)));
    let in_range = !values.is_empty() && lo > 0.0 && hi < delta;
    clauses.push(Clause {
        name: "(ii)".into(),
        lhs: if lo > 0.0 { hi } else { lo },
        rhs: delta,
        holds: in_range,
        note: format!("rho_n in (0, delta); observed range [{lo}, {hi}]"),
    });

    let tail = values.last().copied().unwrap_or(f64::NAN);
    clauses.push(Clause {
        name: "(iii)".into(),
        lhs: tail * (delta - tail),
        rhs: 0.0,
        holds: tail > 0.0 && tail < delta,
        note: "repeating tail rho in (0, delta) makes sum rho_n (delta - rho_n) diverge".into(),
    });

    ConditionReport {
        satisfied: false,
        norm_bound_sq,
        beta: cfg.beta,
        delta,
        clauses,
        first_violated: None,
    }
    .finish()
}

/// Forward-backward condition `gamma * lambda * |Phi|^2 < 2`; with unit step
/// this is `lambda < 2 / |Phi|^2`.
pub fn check_fbs_condition(gamma: f64, lambda: f64, norm_sq: f64) -> ConditionReport {
    let product = gamma * lambda * norm_sq;
    let clauses = vec![
        Clause {
            name: "positivity".into(),
            lhs: gamma.min(lambda),
            rhs: 0.0,
            holds: gamma > 0.0 && lambda > 0.0,
            note: "gamma, lambda > 0".into(),
        },
        Clause {
            name: "fbs-step".into(),
            lhs: product,
            rhs: 2.0,
            holds: product < 2.0,
            note: "gamma * lambda * |Phi|^2 < 2".into(),
        },
    ];
    ConditionReport {
        satisfied: false,
        norm_bound_sq: norm_sq,
        beta: lambda * norm_sq,
        delta: f64::NAN,
        clauses,
        first_violated: None,
    }
    .finish()
}
