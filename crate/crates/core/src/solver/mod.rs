//! Primal-dual splitting solvers, the plug-and-play variants, condition
//! checks and a Douglas-Rachford reference solver.

mod conditions;
mod config;
mod corollary;
mod fbs;
mod oracle;
mod params;
mod pds;
mod report;

pub use conditions::{check_conditions, check_fbs_condition, Clause, ConditionReport};
pub use config::{Relaxation, SolverConfig};
pub use corollary::{corollary_solve, CorollaryProblem, DataFidelity};
pub use fbs::pnp_fbs_solve;
pub use oracle::{dr_oracle_solve, oracle_objective, DiagonalOperator, DrOptions, DrSolution, OracleTerm};
pub use params::{
    default_alpha, default_iterations, default_lambda, epsilon_opt, lambda_opt, Task, ALPHA_DEBLUR,
    ALPHA_INPAINT, ALPHA_SIGMAS, LAMBDA_DEBLUR, LAMBDA_ETAS, LAMBDA_INPAINT,
};
pub use pds::{pds_solve, pnp_pds_solve, pnp_pds_solve_with, LeastSquares, PdsProblem, Probe, SmoothTerm};
pub use report::{RunReport, SolveOutcome, Termination, TraceRecord};
