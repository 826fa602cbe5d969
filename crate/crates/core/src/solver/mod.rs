//! Generic optimization back ends: a sparse revised simplex LP solver and a
//! projected gradient method with the projections the allocators need.

mod lp;
mod pgd;
mod projection;

pub use lp::{solve_lp, Constraint, LinearProgram, LpError, LpSolution, LpStatus, Sense};
pub use pgd::{solve_projected_gradient, PgdError, PgdResult, ProjectedProblem, StepRule, Termination, TraceEntry};
pub use projection::{project_box, project_simplex_floor, project_weighted_floor};
