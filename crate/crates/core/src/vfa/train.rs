use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::features::{feature_seed, value_estimate, FeatureEngine, FeatureVector};
use super::replay::{er_targets, ridge_fit, AcceptBranch, Experience, ReplayMemory};
use crate::allocation::{check_feasible, decide_allocation, AllocationError, CfaScheme};
use crate::domain::{apply_demand_control, PreDecisionState, ProblemConfig, RequestType};
use crate::sim::{Engine, SimError};
use crate::stochastic::{build_scenario_stream, derive_seed, rng_for};
use locker_optim::OptimError;

const TRAIN_STREAM: u64 = 0x7a1;
const FEATURES: u64 = 0xfea;
const EXPLORE: u64 = 0xe9;
const REPLAY: u64 = 0x4e9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variant {
    TD,
    ER,
    CER,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::TD, Variant::ER, Variant::CER];

    pub fn code(self) -> &'static str {
        match self {
            Variant::TD => "TD",
            Variant::ER => "ER",
            Variant::CER => "CER",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|v| v.code() == s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainingParams {
    pub days: u32,
    /// Days simulated with accept-all control to build the start state.
    pub warmup_days: u32,
    pub alpha_theta: f64,
    pub alpha_reward: f64,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    /// Day by which exploration has decayed to `epsilon_end`.
    pub epsilon_days: u32,
    pub memory: usize,
    pub batch: usize,
    pub ridge: f64,
    pub replay_start: u32,
    pub replay_every: u32,
    pub scenarios: usize,
    pub divergence_cap: f64,
    /// Run TD updates and store experiences at slots without a request.
    pub learn_without_arrival: bool,
}

impl Default for TrainingParams {
    fn default() -> Self {
        Self {
            days: 2500,
            warmup_days: 5,
            alpha_theta: 0.001,
            alpha_reward: 0.001,
            epsilon_start: 1.0,
            epsilon_end: 0.1,
            epsilon_days: 1200,
            memory: 10_000,
            batch: 4_000,
            ridge: 4.0,
            replay_start: 100,
            replay_every: 5,
            scenarios: 10,
            divergence_cap: 1e6,
            learn_without_arrival: true,
        }
    }
}

impl TrainingParams {
    /// Linear decay from `epsilon_start` on day 1 to `epsilon_end` on
    /// `epsilon_days`, constant afterwards.
    pub fn epsilon(&self, day: u32) -> f64 {
        if self.epsilon_days <= 1 || day >= self.epsilon_days {
            return self.epsilon_end;
        }
        let frac = (day.max(1) - 1) as f64 / (self.epsilon_days - 1) as f64;
        self.epsilon_start + (self.epsilon_end - self.epsilon_start) * frac
    }
}

/// Learned weights with the settings needed to use them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedWeights {
    /// Scheme of the tentative plans behind the features.
    pub feature_scheme: CfaScheme,
    /// Scheme that allocated parcels during training.
    pub allocation_scheme: CfaScheme,
    pub variant: Variant,
    pub theta: Vec<f64>,
    pub reward_rate: f64,
    pub seed: u64,
    pub params: TrainingParams,
}

impl TrainedWeights {
    pub fn zero(cfg: &ProblemConfig, scheme: CfaScheme, variant: Variant, params: TrainingParams) -> Self {
        Self {
            feature_scheme: scheme,
            allocation_scheme: scheme,
            variant,
            theta: vec![0.0; cfg.feature_len()],
            reward_rate: 0.0,
            seed: 0,
            params,
        }
    }
}

#[derive(Debug, Error)]
pub enum TrainingError {
    #[error("weights diverged on day {day}: max |θ| = {norm:e}")]
    Diverged { day: u32, norm: f64, theta: Vec<f64> },
    #[error(transparent)]
    Solver(#[from] OptimError),
    #[error(transparent)]
    Allocation(#[from] AllocationError),
    #[error(transparent)]
    Sim(#[from] SimError),
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingLog {
    /// Reward-rate estimate at the end of each day.
    pub reward_rate: Vec<f64>,
    /// `(day, θ)` after every replay update.
    pub snapshots: Vec<(u32, Vec<f64>)>,
    pub td_updates: u64,
    pub replay_updates: u32,
    pub learn_without_arrival: bool,
}

#[derive(Debug, Clone)]
pub struct TrainerState {
    pub theta: Vec<f64>,
    pub reward_rate: f64,
    pub rho: f64,
    pub memory: ReplayMemory,
    pub epoch: u64,
}

impl TrainerState {
    pub fn new(feature_len: usize, memory: usize) -> Self {
        Self {
            theta: vec![0.0; feature_len],
            reward_rate: 0.0,
            rho: 0.0,
            memory: ReplayMemory::new(memory),
            epoch: 0,
        }
    }

    /// Average-reward TD step; returns the TD error.
    pub fn td_update(
        &mut self,
        reward: f64,
        previous: &FeatureVector,
        next: &FeatureVector,
        alpha_theta: f64,
        alpha_reward: f64,
    ) -> f64 {
        let delta = reward - self.reward_rate + value_estimate(next, &self.theta) - value_estimate(previous, &self.theta);
        self.rho += alpha_reward * (1.0 - self.rho);
        if self.rho > 0.0 {
            self.reward_rate += alpha_reward / self.rho * delta;
        }
        for (t, &p) in self.theta.iter_mut().zip(&previous.0) {
            *t += alpha_theta * delta * p;
        }
        delta
    }

    /// Refits θ on a uniform batch of stored experiences.
    pub fn er_update(
        &mut self,
        batch: usize,
        ridge: f64,
        structure: Option<(usize, usize)>,
        rng: &mut impl Rng,
    ) -> Result<(), OptimError> {
        if self.memory.is_empty() {
            return Ok(());
        }
        let idx = self.memory.sample_indices(batch, rng);
        let chosen: Vec<&Experience> = idx.iter().map(|&i| self.memory.get(i)).collect();
        let targets = er_targets(chosen.iter().copied(), &self.theta, self.reward_rate);
        let previous: Vec<&FeatureVector> = chosen.iter().map(|e| &e.previous).collect();
        self.theta = ridge_fit(&previous, &targets, ridge, structure)?;
        Ok(())
    }
}

/// Trains linear value weights by simulating `params.days` days.
/// `allocation_scheme` allocates parcels; `feature_scheme` shapes the
/// features (they differ only in mismatch experiments).
pub fn train(
    cfg: &ProblemConfig,
    feature_scheme: CfaScheme,
    allocation_scheme: CfaScheme,
    variant: Variant,
    params: &TrainingParams,
    seed: u64,
) -> Result<(TrainedWeights, TrainingLog), TrainingError> {
    let mut state = TrainerState::new(cfg.feature_len(), params.memory);
    let mut log = TrainingLog {
        learn_without_arrival: params.learn_without_arrival,
        ..TrainingLog::default()
    };
    let done = |state: TrainerState| TrainedWeights {
        feature_scheme,
        allocation_scheme,
        variant,
        theta: state.theta,
        reward_rate: state.reward_rate,
        seed,
        params: params.clone(),
    };
    if params.days == 0 {
        return Ok((done(state), log));
    }
    let stream = build_scenario_stream(cfg, derive_seed(&[seed, TRAIN_STREAM]), 0, params.warmup_days + params.days);
    let feature_base = derive_seed(&[seed, FEATURES]);
    let mut explore = rng_for(&[seed, EXPLORE]);
    let mut replay_rng = rng_for(&[seed, REPLAY]);
    let mut features = FeatureEngine::new(feature_scheme, params.scenarios);
    let mut engine = Engine::new(cfg, &stream);

    for _ in 0..params.warmup_days {
        for _ in 0..cfg.slots {
            let s = engine.advance()?;
            let ok = s.request.request().is_some_and(|r| check_feasible(cfg, &s.occupancy, &s.pending, Some(r)));
            engine.decide(&s, ok)?;
        }
        let s = engine.advance()?;
        let plan = decide_allocation(cfg, &s.occupancy, &s.pending, allocation_scheme)?;
        engine.allocate(&s, &plan)?;
    }
    let post = engine.post_state().clone();
    let mut previous = features.compute(cfg, &post, feature_seed(feature_base, post.day, post.slot))?;
    let structure = (variant == Variant::CER).then(|| (cfg.sizes(), cfg.extended_horizon()));

    for tau in 1..=params.days {
        let epsilon = params.epsilon(tau);
        for _ in 0..cfg.slots {
            let s = engine.advance()?;
            state.epoch += 1;
            if matches!(s.request, RequestType::NoArrival) && !params.learn_without_arrival {
                engine.decide(&s, false)?;
                continue;
            }
            let (accept, reward, next, experience) =
                explore_or_exploit(cfg, &s, &state.theta, &mut features, feature_base, epsilon, &mut explore)?;
            state.td_update(reward, &previous, &next, params.alpha_theta, params.alpha_reward);
            log.td_updates += 1;
            state.memory.push(Experience {
                previous,
                ..experience
            });
            previous = next;
            engine.decide(&s, accept)?;
        }
        let s = engine.advance()?;
        state.epoch += 1;
        let plan = decide_allocation(cfg, &s.occupancy, &s.pending, allocation_scheme)?;
        let post = engine.allocate(&s, &plan)?.clone();
        previous = features.compute(cfg, &post, feature_seed(feature_base, post.day, post.slot))?;

        if variant != Variant::TD && tau > params.replay_start && params.replay_every > 0 && tau % params.replay_every == 0 {
            state.er_update(params.batch, params.ridge, structure, &mut replay_rng)?;
            log.replay_updates += 1;
            log.snapshots.push((tau, state.theta.clone()));
        }
        log.reward_rate.push(state.reward_rate);
        let norm = state.theta.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if !norm.is_finite() || norm > params.divergence_cap {
            return Err(TrainingError::Diverged {
                day: tau,
                norm,
                theta: state.theta,
            });
        }
    }
    Ok((done(state), log))
}

/// ε-greedy demand control for one epoch. Returns the decision, its reward,
/// the chosen branch's features and the experience without its previous
/// features.
fn explore_or_exploit(
    cfg: &ProblemConfig,
    s: &PreDecisionState,
    theta: &[f64],
    features: &mut FeatureEngine,
    base: u64,
    epsilon: f64,
    rng: &mut impl Rng,
) -> Result<(bool, f64, FeatureVector, Experience), TrainingError> {
    let seed = feature_seed(base, s.day, s.slot);
    let reject_post = apply_demand_control(cfg, s, false).map_err(SimError::from)?;
    let reject = features.compute(cfg, &reject_post, seed)?;
    let feasible = s
        .request
        .request()
        .filter(|r| check_feasible(cfg, &s.occupancy, &s.pending, Some(r)))
        .copied();
    let explore_draw: f64 = rng.random();
    let coin: bool = rng.random();
    let Some(r) = feasible else {
        let exp = Experience {
            previous: FeatureVector(Vec::new()),
            reject: reject.clone(),
            accept: AcceptBranch::Unavailable,
        };
        return Ok((false, 0.0, reject, exp));
    };
    let accept_post = apply_demand_control(cfg, s, true).map_err(SimError::from)?;
    let accept = features.compute(cfg, &accept_post, seed)?;
    let m = cfg.priority[r.customer];
    let greedy = m + value_estimate(&accept, theta) >= value_estimate(&reject, theta);
    let g = if explore_draw < epsilon { coin } else { greedy };
    let chosen = if g { accept.clone() } else { reject.clone() };
    let exp = Experience {
        previous: FeatureVector(Vec::new()),
        reject,
        accept: AcceptBranch::Feasible {
            features: accept,
            reward: m,
        },
    };
    Ok((g, if g { m } else { 0.0 }, chosen, exp))
}
