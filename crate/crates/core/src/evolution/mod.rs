//! Dual-space evolution equations `d(Ux)/dt + A(t)x = f(t)` and their
//! regularized variants, the stationary problems they approach, and checks
//! of recorded runs against the predicted decay.

pub mod integrate;
pub mod operator;
pub mod problem;
pub mod stationary;
pub mod theorems;
pub mod trace;

pub use integrate::{integrate, integrate_on, Diagnostics, IntegrateOptions, Trajectory};
pub use operator::{Drift, Monotonicity, Operator, OperatorKind, OperatorSpec};
pub use problem::{EvolutionProblem, Flow, Forcing, GridSpec, Mode, Perturbation, Regularization};
pub use stationary::{
    anchor_solution, min_norm_solution, regularized_path, solve_stationary, stationary_residual,
    RegularizedPath, PATH_TOL, STATIONARY_TOL,
};
pub use theorems::{check_theorem, tail_envelope, CheckParams, Hypothesis, NamedBound, TheoremReport, Verdict};
pub use trace::{
    anchor_for, chain_rule_check, chain_rule_discrepancy, lyapunov_trace, Anchor, ChainRuleReport, TraceRow,
    TrajectoryTrace,
};
