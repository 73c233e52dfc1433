use thiserror::Error;

use super::config::ProblemConfig;
use super::state::{
    AllocationPlan, Decision, ExogenousInfo, LockerOccupancy, PendingOrders, PostDecisionState,
    PreDecisionState, RequestType,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TransitionError {
    #[error("slot {slot} outside 1..={max}")]
    SlotOutOfRange { slot: usize, max: usize },
    #[error("cannot accept at an epoch without a request")]
    AcceptWithoutRequest,
    #[error("demand control is not possible at the allocation epoch")]
    NotDemandEpoch,
    #[error("allocation only happens at the allocation epoch")]
    NotAllocationEpoch,
    #[error("request lead time {0} outside the order horizon")]
    LeadOutOfRange(usize),
    #[error("allocation infeasible: {0}")]
    InfeasibleAllocation(String),
    #[error("pickups exceed occupancy at size {size}, customer {customer}, dwell {dwell}")]
    PickupExceedsOccupancy {
        size: usize,
        customer: usize,
        dwell: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EpochKind {
    DemandControl,
    Allocation,
}

pub fn classify_epoch(cfg: &ProblemConfig, slot: usize) -> Result<EpochKind, TransitionError> {
    match slot {
        s if s >= 1 && s <= cfg.slots => Ok(EpochKind::DemandControl),
        s if s == cfg.slots + 1 => Ok(EpochKind::Allocation),
        s => Err(TransitionError::SlotOutOfRange {
            slot: s,
            max: cfg.slots + 1,
        }),
    }
}

pub fn apply_demand_control(
    cfg: &ProblemConfig,
    s: &PreDecisionState,
    accept: bool,
) -> Result<PostDecisionState, TransitionError> {
    if classify_epoch(cfg, s.slot)? != EpochKind::DemandControl {
        return Err(TransitionError::NotDemandEpoch);
    }
    let mut pending = s.pending.clone();
    if accept {
        let r = s.request.request().ok_or(TransitionError::AcceptWithoutRequest)?;
        if r.lead == 0 || r.lead > cfg.horizon() {
            return Err(TransitionError::LeadOutOfRange(r.lead));
        }
        pending.add(r.size, r.customer, r.lead, 1);
    }
    Ok(PostDecisionState {
        day: s.day,
        slot: s.slot,
        occupancy: s.occupancy.clone(),
        pending,
    })
}

/// Checks the structural rules of a first-epoch allocation: only upgrades,
/// every due parcel placed, and the placed parcels fit next to the
/// currently occupied compartments.
pub fn check_allocation(
    cfg: &ProblemConfig,
    occupancy: &LockerOccupancy,
    pending: &PendingOrders,
    a: &AllocationPlan,
) -> Result<(), TransitionError> {
    let (nd, nc) = (cfg.sizes(), cfg.customers());
    if a.0.dims() != [nd, nd, nc] {
        return Err(TransitionError::InfeasibleAllocation("plan has wrong shape".into()));
    }
    for d in 0..nd {
        for delta in 0..d {
            for c in 0..nc {
                if a.get(d, delta, c) > 0 {
                    return Err(TransitionError::InfeasibleAllocation(format!(
                        "size {} parcel placed in smaller size {}",
                        d + 1,
                        delta + 1
                    )));
                }
            }
        }
    }
    for d in 0..nd {
        for c in 0..nc {
            let placed: u32 = (d..nd).map(|delta| a.get(d, delta, c)).sum();
            if placed != pending.get(d, c, 1) {
                return Err(TransitionError::InfeasibleAllocation(format!(
                    "{placed} of {} due parcels of size {} customer {} placed",
                    pending.get(d, c, 1),
                    d + 1,
                    c + 1
                )));
            }
        }
    }
    for delta in 0..nd {
        let new: u32 = (0..nc).map(|c| a.into_size(delta, c)).sum();
        let used = new + occupancy.in_size(delta);
        if used > cfg.compartments[delta] {
            return Err(TransitionError::InfeasibleAllocation(format!(
                "size {} needs {used} of {} compartments",
                delta + 1,
                cfg.compartments[delta]
            )));
        }
    }
    Ok(())
}

/// Day shift: due parcels enter the locker with dwell 1, older parcels age
/// by a day and those reaching the storage limit leave the state, and
/// pending orders move one allocation closer.
pub fn apply_allocation(
    cfg: &ProblemConfig,
    s: &PreDecisionState,
    a: &AllocationPlan,
) -> Result<PostDecisionState, TransitionError> {
    if classify_epoch(cfg, s.slot)? != EpochKind::Allocation {
        return Err(TransitionError::NotAllocationEpoch);
    }
    check_allocation(cfg, &s.occupancy, &s.pending, a)?;
    let (nd, nc, nf) = (cfg.sizes(), cfg.customers(), cfg.horizon());
    let tracked = cfg.max_storage.saturating_sub(1);
    let mut occupancy = LockerOccupancy::empty(cfg);
    let mut pending = PendingOrders::empty(cfg);
    for delta in 0..nd {
        for c in 0..nc {
            for h in 2..=tracked {
                occupancy.set(delta, c, h, s.occupancy.get(delta, c, h - 1));
            }
            if tracked >= 1 {
                occupancy.set(delta, c, 1, a.into_size(delta, c));
            }
        }
    }
    for d in 0..nd {
        for c in 0..nc {
            for f in 1..nf {
                pending.set(d, c, f, s.pending.get(d, c, f + 1));
            }
        }
    }
    Ok(PostDecisionState {
        day: s.day,
        slot: s.slot,
        occupancy,
        pending,
    })
}

pub fn apply_exogenous(
    sx: &PostDecisionState,
    w: &ExogenousInfo,
) -> Result<PreDecisionState, TransitionError> {
    let mut occupancy = sx.occupancy.clone();
    for (size, customer, dwell, p) in w.pickups.cells() {
        let l = occupancy.get(size, customer, dwell);
        if p > l {
            return Err(TransitionError::PickupExceedsOccupancy {
                size,
                customer,
                dwell,
            });
        }
        occupancy.set(size, customer, dwell, l - p);
    }
    Ok(PreDecisionState {
        day: w.day,
        slot: w.slot,
        occupancy,
        pending: sx.pending.clone(),
        request: w.request,
    })
}

pub fn reward(cfg: &ProblemConfig, s: &PreDecisionState, x: &Decision) -> f64 {
    match (x, &s.request) {
        (Decision::DemandControl(true), RequestType::Request(r)) => cfg.priority[r.customer],
        _ => 0.0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::state::Request;
    use crate::domain::worked_example;

    #[test]
    fn classify_boundaries() {
        let cfg = worked_example::config();
        assert_eq!(classify_epoch(&cfg, 1), Ok(EpochKind::DemandControl));
        assert_eq!(classify_epoch(&cfg, cfg.slots), Ok(EpochKind::DemandControl));
        assert_eq!(classify_epoch(&cfg, cfg.slots + 1), Ok(EpochKind::Allocation));
        assert!(classify_epoch(&cfg, 0).is_err());
        assert!(classify_epoch(&cfg, cfg.slots + 2).is_err());
    }

    #[test]
    fn accepting_worked_example_request() {
        let cfg = worked_example::config();
        let s = worked_example::state_k();
        let sx = apply_demand_control(&cfg, &s, true).unwrap();
        assert_eq!(sx.occupancy, s.occupancy);
        assert_eq!(sx.pending.get(0, 0, 1), 1);
        assert_eq!(sx.pending.get(1, 0, 4), 1);
        assert_eq!(sx.pending.total(), 2);
        assert_eq!(sx, worked_example::post_state_k());
        let rejected = apply_demand_control(&cfg, &s, false).unwrap();
        assert_eq!(rejected.pending, s.pending);
    }

    #[test]
    fn accepting_nothing_is_an_error() {
        let cfg = worked_example::config();
        let mut s = worked_example::state_k();
        s.request = RequestType::NoArrival;
        assert_eq!(
            apply_demand_control(&cfg, &s, true),
            Err(TransitionError::AcceptWithoutRequest)
        );
    }

    #[test]
    fn pickups_between_k_and_k1() {
        let cfg = worked_example::config();
        let sx = worked_example::post_state_k();
        let mut p = LockerOccupancy::empty(&cfg);
        p.set(0, 0, 2, 1);
        p.set(1, 0, 1, 1);
        let w = ExogenousInfo {
            day: sx.day,
            slot: 9,
            request: RequestType::Request(Request {
                customer: 0,
                size: 0,
                lead: 3,
            }),
            pickups: p,
        };
        let s1 = apply_exogenous(&sx, &w).unwrap();
        assert_eq!(s1.occupancy.get(0, 0, 1), 2);
        assert_eq!(s1.occupancy.get(0, 0, 2), 0);
        assert_eq!(s1.occupancy.get(1, 0, 1), 0);
        assert_eq!(s1.occupancy.get(1, 0, 2), 0);
        let mut too_many = LockerOccupancy::empty(&cfg);
        too_many.set(1, 0, 2, 1);
        let w = ExogenousInfo {
            pickups: too_many,
            ..w
        };
        assert!(apply_exogenous(&sx, &w).is_err());
    }

    #[test]
    fn allocation_of_worked_example() {
        let cfg = worked_example::config();
        let s = worked_example::state_k2();
        let mut a = AllocationPlan::empty(&cfg);
        a.set(0, 1, 0, 1);
        let sx = apply_allocation(&cfg, &s, &a).unwrap();
        assert_eq!(sx, worked_example::post_state_k2());
        // Placing the small parcel in a small compartment is also legal.
        let mut small = AllocationPlan::empty(&cfg);
        small.set(0, 0, 0, 1);
        assert!(apply_allocation(&cfg, &s, &small).is_ok());
        let mut down = AllocationPlan::empty(&cfg);
        down.set(1, 0, 0, 1);
        assert!(apply_allocation(&cfg, &s, &down).is_err());
        assert!(apply_allocation(&cfg, &s, &AllocationPlan::empty(&cfg)).is_err());
    }

    #[test]
    fn empty_allocation_of_empty_state() {
        let cfg = worked_example::config();
        let s = PreDecisionState {
            day: 1,
            slot: cfg.slots + 1,
            occupancy: LockerOccupancy::empty(&cfg),
            pending: PendingOrders::empty(&cfg),
            request: RequestType::NoArrival,
        };
        let sx = apply_allocation(&cfg, &s, &AllocationPlan::empty(&cfg)).unwrap();
        assert_eq!(sx.occupancy.total(), 0);
        assert_eq!(sx.pending.total(), 0);
    }

    #[test]
    fn reward_values() {
        let cfg = crate::domain::Layout::main().config(crate::domain::Setting::parse("3pu").unwrap());
        let s = PreDecisionState {
            day: 1,
            slot: 1,
            occupancy: LockerOccupancy::empty(&cfg),
            pending: PendingOrders::empty(&cfg),
            request: RequestType::Request(Request {
                customer: 0,
                size: 0,
                lead: 1,
            }),
        };
        assert_eq!(reward(&cfg, &s, &Decision::DemandControl(true)), 3.0);
        assert_eq!(reward(&cfg, &s, &Decision::DemandControl(false)), 0.0);
        assert_eq!(
            reward(&cfg, &s, &Decision::Allocation(AllocationPlan::empty(&cfg))),
            0.0
        );
    }
}
