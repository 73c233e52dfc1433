use std::fmt;

use serde::{Deserialize, Serialize};

use super::config::ProblemConfig;

/// Dense three-way table of counts.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Grid3 {
    dims: [usize; 3],
    data: Vec<u32>,
}

impl Grid3 {
    pub fn zeros(a: usize, b: usize, c: usize) -> Self {
        Self {
            dims: [a, b, c],
            data: vec![0; a * b * c],
        }
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    fn idx(&self, i: usize, j: usize, k: usize) -> usize {
        debug_assert!(i < self.dims[0] && j < self.dims[1] && k < self.dims[2]);
        (i * self.dims[1] + j) * self.dims[2] + k
    }

    pub fn get(&self, i: usize, j: usize, k: usize) -> u32 {
        self.data[self.idx(i, j, k)]
    }

    pub fn set(&mut self, i: usize, j: usize, k: usize, v: u32) {
        let x = self.idx(i, j, k);
        self.data[x] = v;
    }

    pub fn add(&mut self, i: usize, j: usize, k: usize, v: u32) {
        let x = self.idx(i, j, k);
        self.data[x] += v;
    }

    pub fn total(&self) -> u32 {
        self.data.iter().sum()
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|&v| v == 0)
    }

    pub fn values(&self) -> &[u32] {
        &self.data
    }

    /// Nonzero cells as `(i, j, k, count)`.
    pub fn nonzero(&self) -> impl Iterator<Item = (usize, usize, usize, u32)> + '_ {
        let [_, b, c] = self.dims;
        self.data
            .iter()
            .enumerate()
            .filter(|(_, &v)| v > 0)
            .map(move |(x, &v)| (x / (b * c), (x / c) % b, x % c, v))
    }
}

/// Occupied compartments `l[δ][c][h]` for dwell days `h ∈ 1..B-1`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LockerOccupancy(pub Grid3);

impl LockerOccupancy {
    pub fn empty(cfg: &ProblemConfig) -> Self {
        Self(Grid3::zeros(cfg.sizes(), cfg.customers(), cfg.max_storage.saturating_sub(1)))
    }

    pub fn get(&self, size: usize, customer: usize, dwell: usize) -> u32 {
        self.0.get(size, customer, dwell - 1)
    }

    pub fn set(&mut self, size: usize, customer: usize, dwell: usize, v: u32) {
        self.0.set(size, customer, dwell - 1, v)
    }

    pub fn add(&mut self, size: usize, customer: usize, dwell: usize, v: u32) {
        self.0.add(size, customer, dwell - 1, v)
    }

    pub fn in_size(&self, size: usize) -> u32 {
        let [_, c, h] = self.0.dims();
        (0..c)
            .flat_map(|ci| (0..h).map(move |hi| (ci, hi)))
            .map(|(ci, hi)| self.0.get(size, ci, hi))
            .sum()
    }

    /// Cells as `(size, customer, dwell, count)` with 1-based dwell.
    pub fn cells(&self) -> impl Iterator<Item = (usize, usize, usize, u32)> + '_ {
        self.0.nonzero().map(|(d, c, h, v)| (d, c, h + 1, v))
    }

    pub fn total(&self) -> u32 {
        self.0.total()
    }
}

/// Accepted orders `o[d][c][f]` awaiting delivery in `f ∈ 1..F` allocations.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PendingOrders(pub Grid3);

impl PendingOrders {
    pub fn empty(cfg: &ProblemConfig) -> Self {
        Self(Grid3::zeros(cfg.sizes(), cfg.customers(), cfg.horizon()))
    }

    pub fn get(&self, size: usize, customer: usize, remaining: usize) -> u32 {
        self.0.get(size, customer, remaining - 1)
    }

    pub fn set(&mut self, size: usize, customer: usize, remaining: usize, v: u32) {
        self.0.set(size, customer, remaining - 1, v)
    }

    pub fn add(&mut self, size: usize, customer: usize, remaining: usize, v: u32) {
        self.0.add(size, customer, remaining - 1, v)
    }

    /// Cells as `(size, customer, remaining, count)` with 1-based remaining.
    pub fn cells(&self) -> impl Iterator<Item = (usize, usize, usize, u32)> + '_ {
        self.0.nonzero().map(|(d, c, f, v)| (d, c, f + 1, v))
    }

    pub fn total(&self) -> u32 {
        self.0.total()
    }

    pub fn with_request(&self, r: &Request) -> Self {
        let mut o = self.clone();
        o.add(r.size, r.customer, r.lead, 1);
        o
    }
}

/// A delivery request; sizes and customer types are 0-based, `lead` is the
/// number of days until delivery.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Request {
    pub customer: usize,
    pub size: usize,
    pub lead: usize,
}

impl fmt::Display for Request {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "c{}d{}e{}", self.customer + 1, self.size + 1, self.lead)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RequestType {
    NoArrival,
    Request(Request),
}

impl RequestType {
    pub fn request(&self) -> Option<&Request> {
        match self {
            RequestType::NoArrival => None,
            RequestType::Request(r) => Some(r),
        }
    }
}

impl From<Option<Request>> for RequestType {
    fn from(r: Option<Request>) -> Self {
        r.map_or(RequestType::NoArrival, RequestType::Request)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PreDecisionState {
    pub day: u32,
    /// Slot `1..=T`, or `T+1` for the allocation epoch.
    pub slot: usize,
    pub occupancy: LockerOccupancy,
    pub pending: PendingOrders,
    pub request: RequestType,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PostDecisionState {
    pub day: u32,
    pub slot: usize,
    pub occupancy: LockerOccupancy,
    pub pending: PendingOrders,
}

impl PostDecisionState {
    pub fn empty(cfg: &ProblemConfig, day: u32, slot: usize) -> Self {
        Self {
            day,
            slot,
            occupancy: LockerOccupancy::empty(cfg),
            pending: PendingOrders::empty(cfg),
        }
    }
}

/// First-epoch assignment `a[d][δ][c]` of due parcels to compartment sizes.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AllocationPlan(pub Grid3);

impl AllocationPlan {
    pub fn empty(cfg: &ProblemConfig) -> Self {
        Self(Grid3::zeros(cfg.sizes(), cfg.sizes(), cfg.customers()))
    }

    pub fn get(&self, parcel: usize, compartment: usize, customer: usize) -> u32 {
        self.0.get(parcel, compartment, customer)
    }

    pub fn set(&mut self, parcel: usize, compartment: usize, customer: usize, v: u32) {
        self.0.set(parcel, compartment, customer, v)
    }

    pub fn total(&self) -> u32 {
        self.0.total()
    }

    /// Parcels placed into compartments of size `compartment` for customer `c`.
    pub fn into_size(&self, compartment: usize, customer: usize) -> u32 {
        (0..=compartment).map(|d| self.get(d, compartment, customer)).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Decision {
    DemandControl(bool),
    Allocation(AllocationPlan),
}

/// Information revealed between a post-decision state and the next epoch.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExogenousInfo {
    pub day: u32,
    pub slot: usize,
    pub request: RequestType,
    pub pickups: LockerOccupancy,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_nonzero_reports_coordinates() {
        let mut g = Grid3::zeros(2, 3, 4);
        g.set(1, 2, 3, 5);
        g.set(0, 1, 0, 1);
        let cells: Vec<_> = g.nonzero().collect();
        assert_eq!(cells, vec![(0, 1, 0, 1), (1, 2, 3, 5)]);
        assert_eq!(g.total(), 6);
    }
}
