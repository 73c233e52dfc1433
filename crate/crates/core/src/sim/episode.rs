use serde::{Deserialize, Serialize};

use crate::domain::{AllocationPlan, ProblemConfig, Request, RequestType};
use crate::policies::{fc_decide, PolicyError, PolicyPair, PolicyRunner};
use crate::stochastic::ScenarioStream;

use super::Engine;

/// One decision epoch as it happened.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum EpochRecord {
    Demand {
        day: u32,
        slot: usize,
        request: RequestType,
        accepted: bool,
    },
    Allocation {
        day: u32,
        plan: AllocationPlan,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RequestRecord {
    pub day: u32,
    pub slot: usize,
    pub request: Request,
    pub feasible: bool,
    pub accepted: bool,
}

/// Occupied compartments and pending orders right after the decision of
/// an epoch. Slot `T+1` is the state after allocation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OccupancySnapshot {
    pub day: u32,
    pub slot: usize,
    pub occupied: u32,
    pub pending: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeResult {
    pub days: u32,
    pub warmup: u32,
    pub decisions: Vec<EpochRecord>,
    pub requests: Vec<RequestRecord>,
    pub occupancy: Vec<OccupancySnapshot>,
    /// Priority-weighted accepted requests after warm-up.
    pub weighted_reward: f64,
}

impl EpisodeResult {
    /// Requests arriving after warm-up.
    pub fn measured(&self) -> impl Iterator<Item = &RequestRecord> + '_ {
        self.requests.iter().filter(move |r| r.day > self.warmup)
    }

    pub fn accepted(&self) -> usize {
        self.measured().filter(|r| r.accepted).count()
    }

    pub fn request_count(&self) -> usize {
        self.measured().count()
    }
}

/// Weighted reward of the measured part of a request log.
pub fn weighted_reward(cfg: &ProblemConfig, requests: &[RequestRecord], warmup: u32) -> f64 {
    requests
        .iter()
        .filter(|r| r.day > warmup && r.accepted)
        .map(|r| cfg.priority[r.request.customer])
        .sum()
}

/// Simulates `days` days from an empty locker. The first `warmup` days
/// shape the state but are left out of the reward.
pub fn run_episode(
    cfg: &ProblemConfig,
    pair: &PolicyPair,
    stream: &ScenarioStream,
    days: u32,
    warmup: u32,
    seed: u64,
) -> Result<EpisodeResult, PolicyError> {
    let mut engine = Engine::new(cfg, stream);
    let mut runner = PolicyRunner::new(cfg, pair, seed);
    let epochs = days as usize * (cfg.slots + 1);
    let mut decisions = Vec::with_capacity(epochs);
    let mut requests = Vec::new();
    let mut occupancy = Vec::with_capacity(epochs);
    for _ in 0..days {
        for _ in 0..cfg.slots {
            let s = engine.advance()?;
            let mut accepted = false;
            if let Some(&request) = s.request.request() {
                let feasible = fc_decide(cfg, &s);
                accepted = feasible && runner.demand(&s)?;
                requests.push(RequestRecord {
                    day: s.day,
                    slot: s.slot,
                    request,
                    feasible,
                    accepted,
                });
            }
            let pending = engine.decide(&s, accepted)?.pending.total();
            occupancy.push(OccupancySnapshot {
                day: s.day,
                slot: s.slot,
                occupied: engine.physical_occupancy().iter().sum(),
                pending,
            });
            decisions.push(EpochRecord::Demand {
                day: s.day,
                slot: s.slot,
                request: s.request,
                accepted,
            });
        }
        let s = engine.advance()?;
        let plan = runner.allocate(&s)?;
        let pending = engine.allocate(&s, &plan)?.pending.total();
        occupancy.push(OccupancySnapshot {
            day: s.day,
            slot: s.slot,
            occupied: engine.physical_occupancy().iter().sum(),
            pending,
        });
        decisions.push(EpochRecord::Allocation { day: s.day, plan });
    }
    let weighted_reward = weighted_reward(cfg, &requests, warmup);
    Ok(EpisodeResult {
        days,
        warmup,
        decisions,
        requests,
        occupancy,
        weighted_reward,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::allocation::CfaScheme;
    use crate::domain::{Layout, Setting};
    use crate::policies::{DemandControl, PolicyParams};
    use crate::stochastic::{build_scenario_stream, PickupDraw};

    fn cfg() -> ProblemConfig {
        Layout::desk().config(Setting::parse("2pf").unwrap())
    }

    fn fc(cfg: &ProblemConfig) -> PolicyPair {
        PolicyPair::new(cfg, DemandControl::FC, CfaScheme::DL, None, PolicyParams::default(), false).unwrap()
    }

    #[test]
    fn zero_days_is_empty() {
        let c = cfg();
        let stream = build_scenario_stream(&c, 1, 0, 0);
        let r = run_episode(&c, &fc(&c), &stream, 0, 0, 1).unwrap();
        assert_eq!(r.weighted_reward, 0.0);
        assert!(r.decisions.is_empty() && r.requests.is_empty() && r.occupancy.is_empty());
    }

    #[test]
    fn no_arrivals_keep_the_locker_empty() {
        let c = cfg();
        let n = 4 * c.slots;
        let stream = ScenarioStream::from_parts(c.slots, vec![RequestType::NoArrival; n], vec![PickupDraw { day_bits: 0, slot: 1 }; n]);
        let r = run_episode(&c, &fc(&c), &stream, 4, 1, 1).unwrap();
        assert_eq!(r.weighted_reward, 0.0);
        assert!(r.occupancy.iter().all(|o| o.occupied == 0 && o.pending == 0));
        assert_eq!(r.decisions.len(), 4 * (c.slots + 1));
    }

    /// Two days, one compartment per size, a large parcel that can only be
    /// stored once.
    #[test]
    fn fc_matches_a_hand_trace() {
        let mut c = cfg();
        c.compartments = vec![1, 1, 1];
        c.slots = 2;
        let large = |customer, lead| RequestType::Request(Request { customer, size: 2, lead });
        let arrivals = vec![large(0, 1), large(1, 1), large(1, 1), RequestType::NoArrival];
        // day_bits 0 means pickup one day after allocation; slot 2.
        let pickups = vec![PickupDraw { day_bits: 0, slot: 2 }; 4];
        let stream = ScenarioStream::from_parts(c.slots, arrivals, pickups);
        let r = run_episode(&c, &fc(&c), &stream, 2, 0, 1).unwrap();
        let accepted: Vec<bool> = r.requests.iter().map(|x| x.accepted).collect();
        let feasible: Vec<bool> = r.requests.iter().map(|x| x.feasible).collect();
        // The first large parcel blocks the only large compartment for up to
        // three days, so every later large request is turned down.
        assert_eq!(accepted, vec![true, false, false]);
        assert_eq!(feasible, accepted);
        assert_eq!(r.weighted_reward, c.priority[0]);
        let occupied: Vec<u32> = r.occupancy.iter().map(|o| o.occupied).collect();
        let pending: Vec<u32> = r.occupancy.iter().map(|o| o.pending).collect();
        assert_eq!(occupied, vec![0, 0, 1, 1, 0, 0]);
        assert_eq!(pending, vec![1, 1, 0, 0, 0, 0]);
        match &r.decisions[2] {
            EpochRecord::Allocation { day: 1, plan } => assert_eq!(plan.get(2, 2, 0), 1),
            other => panic!("unexpected record {other:?}"),
        }
    }

    #[test]
    fn accepted_orders_are_allocated_lead_epochs_later() {
        let c = cfg();
        let stream = build_scenario_stream(&c, 9, 0, 12);
        let r = run_episode(&c, &fc(&c), &stream, 12, 0, 9).unwrap();
        let mut due = vec![0u32; 32];
        for q in r.requests.iter().filter(|q| q.accepted) {
            due[(q.day + q.request.lead as u32 - 1) as usize] += 1;
        }
        for rec in &r.decisions {
            if let EpochRecord::Allocation { day, plan } = rec {
                assert_eq!(plan.total(), due[*day as usize], "day {day}");
            }
        }
        let accepted = r.requests.iter().filter(|q| q.accepted).count();
        let rejected_feasible = r.requests.iter().filter(|q| q.feasible && !q.accepted).count();
        let feasible = r.requests.iter().filter(|q| q.feasible).count();
        assert_eq!(accepted, feasible - rejected_feasible);
    }

    #[test]
    fn occupancy_peaks_at_allocation() {
        let c = cfg();
        let stream = build_scenario_stream(&c, 3, 0, 15);
        let r = run_episode(&c, &fc(&c), &stream, 15, 2, 3).unwrap();
        for day in r.occupancy.chunks(c.slots + 1) {
            for w in day[..c.slots].windows(2) {
                assert!(w[1].occupied <= w[0].occupied);
            }
            assert!(day[c.slots].occupied >= day[c.slots - 1].occupied);
        }
        assert_eq!(r.weighted_reward, weighted_reward(&c, &r.requests, 2));
    }

    #[test]
    fn episodes_are_reproducible() {
        let c = cfg();
        let stream = build_scenario_stream(&c, 5, 2, 6);
        let a = run_episode(&c, &fc(&c), &stream, 6, 1, 5).unwrap();
        let b = run_episode(&c, &fc(&c), &stream, 6, 1, 5).unwrap();
        assert_eq!(a, b);
    }
}
