mod config;
mod state;
mod transition;
pub mod worked_example;

pub use config::{ArrivalLaw, ConfigError, Layout, PickupLaw, PickupScenario, ProblemConfig, Setting};
pub use state::{
    AllocationPlan, Decision, ExogenousInfo, Grid3, LockerOccupancy, PendingOrders, PostDecisionState,
    PreDecisionState, Request, RequestType,
};
pub use transition::{
    apply_allocation, apply_demand_control, apply_exogenous, check_allocation, classify_epoch, reward,
    EpochKind, TransitionError,
};
