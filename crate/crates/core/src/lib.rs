//! Numerical tools for fractional hybrid equations with an iterated argument
//!
//! ```text
//! D^α[v(s) - ψ(s, v(s), v(v(s)))] = ℵ₁(s, v(s), v(v(s))) + ℵ₂(s, v(s), v(v(s))),
//! v(s0) = v0,  s ∈ [s0, s0 + a],  0 < α < 1.
//! ```
//!
//! [`solver`] computes the solution by Picard iteration on the integral form,
//! [`monotone`] brackets it between lower and upper iterates, and [`oracle`]
//! provides an independent reference discretisation for testing.

pub mod error;
pub mod expr;
pub mod fraccalc;
pub mod monotone;
pub mod oracle;
pub mod problem;
pub mod scenario;
pub mod solver;

pub use error::{Error, Result};
pub use expr::{parse, Expr, ExprError};
pub use fraccalc::{rl_derivative, rl_integral, DomainPolicy, Grid, GridFunction, Interp};
pub use monotone::{
    iterate_extremal, verify_lower_upper, verify_mixed_pair, BracketReport, MixedKind,
    MonotoneConfig, Role, VerifyConfig,
};
pub use problem::{ProblemSpec, SamplingBox};
pub use solver::{solve_fihie, SolveReport, SolverConfig};
