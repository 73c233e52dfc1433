//! A two-size, single-customer locker walked through three epochs:
//! a request is accepted at slot 7, two parcels are picked up and a second
//! request accepted by slot 9, and a small parcel is allocated to a large
//! compartment at the end of the day.

use super::config::{ArrivalLaw, PickupLaw, ProblemConfig};
use super::state::{LockerOccupancy, PendingOrders, PostDecisionState, PreDecisionState, Request, RequestType};

pub const DAY: u32 = 4;

pub fn config() -> ProblemConfig {
    ProblemConfig {
        compartments: vec![3, 2],
        priority: vec![1.0],
        max_lead: 6,
        max_storage: 3,
        slots: 9,
        arrival: ArrivalLaw {
            customer: vec![0.9],
            size: vec![vec![0.6, 0.4]],
            lead: vec![vec![1.0 / 6.0; 6]],
        },
        pickup: PickupLaw {
            day: vec![vec![0.6, 0.2, 0.2]],
        },
    }
}

fn occupancy(cells: &[(usize, usize, u32)]) -> LockerOccupancy {
    let mut l = LockerOccupancy::empty(&config());
    for &(size, dwell, n) in cells {
        l.set(size, 0, dwell, n);
    }
    l
}

fn pending(cells: &[(usize, usize, u32)]) -> PendingOrders {
    let mut o = PendingOrders::empty(&config());
    for &(size, remaining, n) in cells {
        o.set(size, 0, remaining, n);
    }
    o
}

/// Slot 7: small compartments hold two dwell-1 parcels and one dwell-2
/// parcel, one large compartment holds a dwell-1 parcel, and a large order
/// is due in four allocations. A small next-day request arrives.
pub fn state_k() -> PreDecisionState {
    PreDecisionState {
        day: DAY,
        slot: 7,
        occupancy: occupancy(&[(0, 1, 2), (0, 2, 1), (1, 1, 1)]),
        pending: pending(&[(1, 4, 1)]),
        request: RequestType::Request(Request {
            customer: 0,
            size: 0,
            lead: 1,
        }),
    }
}

pub fn post_state_k() -> PostDecisionState {
    PostDecisionState {
        day: DAY,
        slot: 7,
        occupancy: occupancy(&[(0, 1, 2), (0, 2, 1), (1, 1, 1)]),
        pending: pending(&[(0, 1, 1), (1, 4, 1)]),
    }
}

/// Slot 9, after the dwell-2 small and the dwell-1 large parcel left.
pub fn state_k1() -> PreDecisionState {
    PreDecisionState {
        day: DAY,
        slot: 9,
        occupancy: occupancy(&[(0, 1, 2)]),
        pending: pending(&[(0, 1, 1), (1, 4, 1)]),
        request: RequestType::Request(Request {
            customer: 0,
            size: 0,
            lead: 3,
        }),
    }
}

/// Allocation epoch after one more small pickup.
pub fn state_k2() -> PreDecisionState {
    PreDecisionState {
        day: DAY,
        slot: 10,
        occupancy: occupancy(&[(0, 1, 1)]),
        pending: pending(&[(0, 1, 1), (0, 3, 1), (1, 4, 1)]),
        request: RequestType::NoArrival,
    }
}

/// After the due small parcel went into a large compartment.
pub fn post_state_k2() -> PostDecisionState {
    PostDecisionState {
        day: DAY,
        slot: 10,
        occupancy: occupancy(&[(0, 2, 1), (1, 1, 1)]),
        pending: pending(&[(0, 2, 1), (1, 3, 1)]),
    }
}
