use thiserror::Error;

use crate::domain::{
    apply_allocation, apply_demand_control, apply_exogenous, AllocationPlan, ExogenousInfo, LockerOccupancy,
    PostDecisionState, PreDecisionState, ProblemConfig, RequestType, TransitionError,
};
use crate::stochastic::ScenarioStream;

/// A parcel physically in the locker.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Parcel {
    pub compartment: usize,
    pub customer: usize,
    pub allocated_on: u32,
    pub pickup_after: usize,
    pub pickup_slot: usize,
}

/// An accepted order with its hidden pickup tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Order {
    pub size: usize,
    pub customer: usize,
    /// Day whose allocation epoch places the parcel.
    pub due_day: u32,
    pub pickup_after: usize,
    pub pickup_slot: usize,
}

/// Where arrivals and pickup tags come from.
pub trait ExogenousSource {
    /// Last day with information.
    fn last_day(&self) -> u32;
    fn request(&self, day: u32, slot: usize) -> RequestType;
    /// Pickup `(b, q)` of a parcel whose request arrived at `(day, slot)`.
    fn pickup_tag(&self, cfg: &ProblemConfig, day: u32, slot: usize, customer: usize) -> (usize, usize);
}

impl ExogenousSource for ScenarioStream {
    fn last_day(&self) -> u32 {
        self.days
    }

    fn request(&self, day: u32, slot: usize) -> RequestType {
        ScenarioStream::request(self, day, slot)
    }

    fn pickup_tag(&self, cfg: &ProblemConfig, day: u32, slot: usize, customer: usize) -> (usize, usize) {
        ScenarioStream::pickup_tag(self, cfg, day, slot, customer)
    }
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Transition(#[from] TransitionError),
    #[error("invariant violated on day {day} slot {slot}: {msg}\nstate: {state}")]
    Invariant {
        day: u32,
        slot: usize,
        msg: String,
        state: String,
    },
    #[error("stream ends before day {0}")]
    StreamExhausted(u32),
}

/// Steps the decision process over a scenario stream. The pickup tags are
/// private; callers only see states and aggregate pickups.
#[derive(Debug, Clone)]
pub struct Engine<'a, S: ExogenousSource + ?Sized = ScenarioStream> {
    cfg: &'a ProblemConfig,
    stream: &'a S,
    post: PostDecisionState,
    locker: Vec<Parcel>,
    orders: Vec<Order>,
}

impl<'a, S: ExogenousSource + ?Sized> Engine<'a, S> {
    /// Starts from an empty locker before the first slot of day 1.
    pub fn new(cfg: &'a ProblemConfig, stream: &'a S) -> Self {
        Self::resume(cfg, stream, PostDecisionState::empty(cfg, 0, cfg.slots + 1), Vec::new(), Vec::new())
    }

    /// Continues from a post-decision state whose parcels and orders carry
    /// the given tags.
    pub fn resume(
        cfg: &'a ProblemConfig,
        stream: &'a S,
        post: PostDecisionState,
        locker: Vec<Parcel>,
        orders: Vec<Order>,
    ) -> Self {
        Self {
            cfg,
            stream,
            post,
            locker,
            orders,
        }
    }

    pub fn post_state(&self) -> &PostDecisionState {
        &self.post
    }

    /// Compartments physically occupied per size, including parcels past
    /// the tracked dwell range.
    pub fn physical_occupancy(&self) -> Vec<u32> {
        let mut out = vec![0; self.cfg.sizes()];
        for p in &self.locker {
            out[p.compartment] += 1;
        }
        out
    }

    /// Reveals the next epoch: pickups in the coming slot and its request.
    pub fn advance(&mut self) -> Result<PreDecisionState, SimError> {
        let t_max = self.cfg.slots;
        let (day, slot) = if self.post.slot > t_max {
            (self.post.day + 1, 1)
        } else {
            (self.post.day, self.post.slot + 1)
        };
        if day > self.stream.last_day() {
            return Err(SimError::StreamExhausted(day));
        }
        let mut pickups = LockerOccupancy::empty(self.cfg);
        let request = if slot <= t_max {
            let tracked = self.cfg.max_storage - 1;
            self.locker.retain(|p| {
                let gone = p.allocated_on + p.pickup_after as u32 == day && p.pickup_slot == slot;
                let dwell = (day - p.allocated_on) as usize;
                if gone && dwell <= tracked {
                    pickups.add(p.compartment, p.customer, dwell, 1);
                }
                !gone
            });
            self.stream.request(day, slot)
        } else {
            RequestType::NoArrival
        };
        let w = ExogenousInfo {
            day,
            slot,
            request,
            pickups,
        };
        Ok(apply_exogenous(&self.post, &w)?)
    }

    /// Applies a demand-control decision taken in `s`.
    pub fn decide(&mut self, s: &PreDecisionState, accept: bool) -> Result<&PostDecisionState, SimError> {
        let post = apply_demand_control(self.cfg, s, accept)?;
        if accept {
            let r = *s.request.request().expect("checked by the transition");
            let (b, q) = self.stream.pickup_tag(self.cfg, s.day, s.slot, r.customer);
            self.orders.push(Order {
                size: r.size,
                customer: r.customer,
                due_day: s.day + r.lead as u32 - 1,
                pickup_after: b,
                pickup_slot: q,
            });
        }
        self.post = post;
        Ok(&self.post)
    }

    /// Applies an allocation at the end of the day. Due orders of one
    /// parcel type are placed in acceptance order, smallest compartment first.
    pub fn allocate(&mut self, s: &PreDecisionState, plan: &AllocationPlan) -> Result<&PostDecisionState, SimError> {
        let post = apply_allocation(self.cfg, s, plan)?;
        let nd = self.cfg.sizes();
        for d in 0..nd {
            for c in 0..self.cfg.customers() {
                let mut due = self.orders.iter().enumerate().filter(|(_, o)| o.due_day == s.day && o.size == d && o.customer == c);
                let mut taken = Vec::new();
                for delta in d..nd {
                    for _ in 0..plan.get(d, delta, c) {
                        let (i, o) = due.next().expect("allocation covers exactly the due orders");
                        taken.push(i);
                        self.locker.push(Parcel {
                            compartment: delta,
                            customer: c,
                            allocated_on: s.day,
                            pickup_after: o.pickup_after,
                            pickup_slot: o.pickup_slot,
                        });
                    }
                }
                drop(due);
                for i in taken.into_iter().rev() {
                    self.orders.remove(i);
                }
            }
        }
        if self.orders.iter().any(|o| o.due_day <= s.day) {
            return Err(self.violation(s.day, s.slot, "due order left unallocated"));
        }
        let physical = self.physical_occupancy();
        for (delta, &n) in physical.iter().enumerate() {
            if n > self.cfg.compartments[delta] {
                return Err(self.violation(s.day, s.slot, &format!("size {} holds {n} parcels", delta + 1)));
            }
        }
        self.post = post;
        Ok(&self.post)
    }

    fn violation(&self, day: u32, slot: usize, msg: &str) -> SimError {
        SimError::Invariant {
            day,
            slot,
            msg: msg.to_string(),
            state: format!("{:?}", self.post),
        }
    }
}
