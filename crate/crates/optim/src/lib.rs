//! Small exact solvers: bounded-integer programs, linear programs and
//! inequality-constrained ridge regression.

mod error;
mod ilp;
mod lp;
mod model;
pub mod oracle;
mod qp;
mod simplex;

pub use error::OptimError;
pub use ilp::{ilp_solve, IlpOutcome};
pub use lp::{lp_solve, LpModel, LpOutcome};
pub use model::{Constraint, IntModel, IntVar, Sense, VarId};
pub use qp::{qp_ridge_constrained, LinearInequality, RidgeProblem, RidgeSolution};
