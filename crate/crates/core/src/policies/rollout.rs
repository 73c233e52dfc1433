use rand::Rng;

use crate::allocation::{decide_allocation, CfaScheme, FeasibilityCache};
use crate::domain::{PostDecisionState, ProblemConfig, RequestType};
use crate::sim::{Engine, ExogenousSource, Order, Parcel};
use crate::stochastic::{derive_seed, elapsed_slots, rng_for, sample_residual_tag, unit_interval};
use crate::vfa::{value_estimate, FeatureEngine};

use super::PolicyError;

const LOCKER_TAGS: u64 = 0x10c;
const ORDER_TAGS: u64 = 0x0d3;
const ARRIVALS: u64 = 0xa77;
const NEW_TAGS: u64 = 0x7a6;
const TERMINAL: u64 = 0x7e3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RolloutParams {
    pub paths: usize,
    /// Epochs simulated per path, allocation epochs included.
    pub horizon: usize,
}

impl Default for RolloutParams {
    fn default() -> Self {
        Self { paths: 5, horizon: 5 }
    }
}

/// Sampled future of one rollout path. Every draw is keyed by its own
/// coordinates, so both branches of a decision see the same randomness.
struct SampledFuture<'a> {
    cfg: &'a ProblemConfig,
    seed: u64,
}

impl ExogenousSource for SampledFuture<'_> {
    fn last_day(&self) -> u32 {
        u32::MAX
    }

    fn request(&self, day: u32, slot: usize) -> RequestType {
        let mut rng = rng_for(&[self.seed, ARRIVALS, day as u64, slot as u64]);
        RequestType::from(self.cfg.arrival.sample(unit_interval(rng.random())))
    }

    fn pickup_tag(&self, cfg: &ProblemConfig, day: u32, slot: usize, customer: usize) -> (usize, usize) {
        let mut rng = rng_for(&[self.seed, NEW_TAGS, day as u64, slot as u64]);
        let b = crate::stochastic::sample_pickup_day(cfg, customer, &mut rng);
        (b, rng.random_range(1..=cfg.slots))
    }
}

/// Samples hidden tags consistent with a public post-decision state.
fn sample_ledger(cfg: &ProblemConfig, post: &PostDecisionState, seed: u64) -> (Vec<Parcel>, Vec<Order>) {
    let after_allocation = post.slot > cfg.slots;
    let t = elapsed_slots(cfg, post.slot);
    let today = if after_allocation { post.day + 1 } else { post.day };
    let mut rng = rng_for(&[seed, LOCKER_TAGS]);
    let mut locker = Vec::new();
    for (delta, c, h, n) in post.occupancy.cells() {
        for _ in 0..n {
            let (beta, q) = sample_residual_tag(cfg, c, h, t, &mut rng).unwrap_or((cfg.max_storage, cfg.slots));
            locker.push(Parcel {
                compartment: delta,
                customer: c,
                allocated_on: today - h as u32,
                pickup_after: beta,
                pickup_slot: q,
            });
        }
    }
    let mut orders = Vec::new();
    for (d, c, f, n) in post.pending.cells() {
        for k in 0..n {
            let mut rng = rng_for(&[seed, ORDER_TAGS, d as u64, c as u64, f as u64, k as u64]);
            let b = crate::stochastic::sample_pickup_day(cfg, c, &mut rng);
            orders.push(Order {
                size: d,
                customer: c,
                due_day: today + f as u32 - 1,
                pickup_after: b,
                pickup_slot: rng.random_range(1..=cfg.slots),
            });
        }
    }
    (locker, orders)
}

/// Mean over sample paths of the rewards collected by accept-all control
/// plus the value of the terminal post-decision state.
#[allow(clippy::too_many_arguments)]
pub fn rollout_value(
    cfg: &ProblemConfig,
    start: &PostDecisionState,
    theta: &[f64],
    features: &mut FeatureEngine,
    scheme: CfaScheme,
    params: RolloutParams,
    seed: u64,
    feasibility: &mut FeasibilityCache,
) -> Result<f64, PolicyError> {
    let use_values = theta.iter().any(|&v| v != 0.0);
    let mut total = 0.0;
    for path in 0..params.paths {
        let path_seed = derive_seed(&[seed, path as u64]);
        let future = SampledFuture { cfg, seed: path_seed };
        let (locker, orders) = sample_ledger(cfg, start, path_seed);
        let mut engine = Engine::resume(cfg, &future, start.clone(), locker, orders);
        let mut reward = 0.0;
        for _ in 0..params.horizon {
            let s = engine.advance()?;
            if s.slot <= cfg.slots {
                let accept = s
                    .request
                    .request()
                    .is_some_and(|r| feasibility.check(cfg, &s.occupancy, &s.pending, Some(r)));
                if accept {
                    reward += cfg.priority[s.request.request().expect("accepted").customer];
                }
                engine.decide(&s, accept)?;
            } else {
                let plan = decide_allocation(cfg, &s.occupancy, &s.pending, scheme)?;
                engine.allocate(&s, &plan)?;
            }
        }
        if use_values {
            let phi = features.compute(cfg, engine.post_state(), derive_seed(&[path_seed, TERMINAL]))?;
            reward += value_estimate(&phi, theta);
        }
        total += reward;
    }
    Ok(total / params.paths.max(1) as f64)
}
