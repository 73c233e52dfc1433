mod cfa;
mod feasibility;
mod windows;

pub use cfa::{
    cfa_coefficients, cfa_model, cfa_model_with, decide_allocation, is_allocatable, length_bound, size_bound,
    solve_two_stage, AllocationError, CfaScheme, CfaVars, WindowWeights, MIN_SECONDARY_WEIGHT,
};
pub(crate) use cfa::{cfa_constraints, solve_windows, window_weights_with};
pub use feasibility::{check_feasible, feasibility_model, FeasibilityCache, PlanVars};
pub(crate) use windows::{add_window_accounting, Occupancy};
pub use windows::{assign_rows, count_windows_oracle, plan_grid, Fault, WindowVars};
