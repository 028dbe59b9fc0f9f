//! Small-scale mixed-integer linear programming.
//!
//! A problem is a list of bounded variables (continuous or binary), linear
//! constraints, and a linear objective. The bundled solver is a dense
//! two-phase simplex with Bland's rule for LP relaxations, wrapped in a
//! best-first branch-and-bound for the binaries. Larger instances are
//! routed to a sparse revised-simplex backend ([`backend::SparseBackend`])
//! behind the same contract; the `Auto` choice picks by problem size.
//!
//! Dense tableaus keep the pivot code auditable but scale as O(rows * cols)
//! memory; anything past a few hundred variables should use the sparse
//! backend.

pub mod backend;
pub mod bnb;
pub mod dump;
pub mod feasibility;
pub mod problem;
pub mod simplex;

pub mod oracle;
pub mod presolve;

pub use backend::{BackendChoice, LpBackend};
pub use bnb::{solve_milp, SolverOptions};
pub use dump::write_lp;
pub use feasibility::{check_feasibility, FeasibilityReport, Violation, ViolationKind};
pub use problem::{
    LinearConstraint, MilpError, MilpProblem, MilpSolution, ObjSense, Sense, SolveStatus,
    VarKind, VariableDef,
};
pub use simplex::solve_lp_relaxation;
