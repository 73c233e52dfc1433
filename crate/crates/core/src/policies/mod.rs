mod dlp;
mod rollout;

use std::fmt;

use locker_optim::OptimError;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::allocation::{check_feasible, decide_allocation, AllocationError, CfaScheme, FeasibilityCache};
use crate::domain::{apply_demand_control, AllocationPlan, PreDecisionState, ProblemConfig};
use crate::sim::SimError;
use crate::stochastic::derive_seed;
use crate::vfa::{feature_seed, value_estimate, FeatureEngine, TrainedWeights, Variant};

pub use dlp::{dlp_decide_request, dlp_expected_demand, dlp_model, dlp_occupancy_probs, dlp_value};
pub use rollout::{rollout_value, RolloutParams};

#[derive(Debug, Error)]
pub enum PolicyError {
    #[error("unknown policy descriptor {0:?}")]
    Descriptor(String),
    #[error("{0} needs trained weights")]
    MissingWeights(String),
    #[error("weights trained as {found} cannot drive {wanted}")]
    WrongVariant { found: String, wanted: String },
    #[error("weights use {features} features with {trained} allocation, policy allocates with {wanted}; pass the mismatch flag to allow this")]
    SchemeMismatch {
        features: CfaScheme,
        trained: CfaScheme,
        wanted: CfaScheme,
    },
    #[error("weight vector has length {found}, expected {expected}")]
    WeightLength { found: usize, expected: usize },
    #[error(transparent)]
    Solver(#[from] OptimError),
    #[error(transparent)]
    Allocation(#[from] AllocationError),
    #[error(transparent)]
    Sim(#[from] SimError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DemandControl {
    /// Accept every feasible request.
    FC,
    DLP,
    /// Greedy with respect to trained values.
    V(Variant),
    /// Rollout with accept-all continuation and no terminal values.
    R,
    /// Rollout with trained terminal values.
    RV(Variant),
}

impl DemandControl {
    pub const ALL: [DemandControl; 9] = [
        DemandControl::FC,
        DemandControl::DLP,
        DemandControl::V(Variant::TD),
        DemandControl::V(Variant::ER),
        DemandControl::V(Variant::CER),
        DemandControl::R,
        DemandControl::RV(Variant::TD),
        DemandControl::RV(Variant::ER),
        DemandControl::RV(Variant::CER),
    ];

    pub fn variant(self) -> Option<Variant> {
        match self {
            DemandControl::V(v) | DemandControl::RV(v) => Some(v),
            _ => None,
        }
    }
}

impl fmt::Display for DemandControl {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DemandControl::FC => write!(f, "FC"),
            DemandControl::DLP => write!(f, "DLP"),
            DemandControl::R => write!(f, "R"),
            DemandControl::V(v) => write!(f, "V-{}", v.code()),
            DemandControl::RV(v) => write!(f, "RV-{}", v.code()),
        }
    }
}

/// Parses descriptors such as `RV-CER_LD` or `FC_DL`.
pub fn parse_descriptor(s: &str) -> Result<(DemandControl, CfaScheme), PolicyError> {
    let err = || PolicyError::Descriptor(s.to_string());
    let (control, scheme) = s.rsplit_once('_').ok_or_else(err)?;
    let scheme = CfaScheme::parse(scheme).ok_or_else(err)?;
    let control = DemandControl::ALL.into_iter().find(|c| c.to_string() == control).ok_or_else(err)?;
    Ok((control, scheme))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PolicyParams {
    /// Scenarios per feature computation.
    pub scenarios: usize,
    pub rollout_paths: usize,
    pub rollout_horizon: usize,
    pub dlp_horizon: usize,
}

impl Default for PolicyParams {
    fn default() -> Self {
        Self {
            scenarios: 10,
            rollout_paths: 5,
            rollout_horizon: 5,
            dlp_horizon: 5,
        }
    }
}

/// A demand-control method paired with an allocation scheme.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyPair {
    pub control: DemandControl,
    pub allocation: CfaScheme,
    pub weights: Option<TrainedWeights>,
    pub params: PolicyParams,
}

impl PolicyPair {
    /// Checks that value-based methods carry weights of the right variant,
    /// trained with this allocation scheme. `allow_mismatch` admits weights
    /// whose features come from another scheme.
    pub fn new(
        cfg: &ProblemConfig,
        control: DemandControl,
        allocation: CfaScheme,
        weights: Option<TrainedWeights>,
        params: PolicyParams,
        allow_mismatch: bool,
    ) -> Result<Self, PolicyError> {
        let weights = match control.variant() {
            None => None,
            Some(v) => {
                let w = weights.ok_or_else(|| PolicyError::MissingWeights(control.to_string()))?;
                if w.variant != v {
                    return Err(PolicyError::WrongVariant {
                        found: w.variant.code().into(),
                        wanted: v.code().into(),
                    });
                }
                if w.theta.len() != cfg.feature_len() {
                    return Err(PolicyError::WeightLength {
                        found: w.theta.len(),
                        expected: cfg.feature_len(),
                    });
                }
                let consistent = w.allocation_scheme == allocation && w.feature_scheme == allocation;
                if !consistent && !(allow_mismatch && w.allocation_scheme == allocation) {
                    return Err(PolicyError::SchemeMismatch {
                        features: w.feature_scheme,
                        trained: w.allocation_scheme,
                        wanted: allocation,
                    });
                }
                Some(w)
            }
        };
        Ok(Self {
            control,
            allocation,
            weights,
            params,
        })
    }

    pub fn descriptor(&self) -> String {
        format!("{}_{}", self.control, self.allocation.code())
    }

    fn feature_scheme(&self) -> CfaScheme {
        self.weights.as_ref().map_or(self.allocation, |w| w.feature_scheme)
    }
}

pub fn fc_decide(cfg: &ProblemConfig, s: &PreDecisionState) -> bool {
    s.request.request().is_some_and(|r| check_feasible(cfg, &s.occupancy, &s.pending, Some(r)))
}

/// `m + V(accept) >= V(reject)` over feasible requests; ties accept.
pub fn vfa_decide(
    cfg: &ProblemConfig,
    s: &PreDecisionState,
    theta: &[f64],
    features: &mut FeatureEngine,
    seed: u64,
) -> Result<bool, PolicyError> {
    if !fc_decide(cfg, s) {
        return Ok(false);
    }
    vfa_compare(cfg, s, theta, features, seed)
}

fn vfa_compare(
    cfg: &ProblemConfig,
    s: &PreDecisionState,
    theta: &[f64],
    features: &mut FeatureEngine,
    seed: u64,
) -> Result<bool, PolicyError> {
    let r = s.request.request().expect("feasible request");
    if theta.iter().all(|&v| v == 0.0) {
        return Ok(cfg.priority[r.customer] >= 0.0);
    }
    let accept = features.compute(cfg, &apply_demand_control(cfg, s, true).map_err(SimError::from)?, seed)?;
    let reject = features.compute(cfg, &apply_demand_control(cfg, s, false).map_err(SimError::from)?, seed)?;
    Ok(cfg.priority[r.customer] + value_estimate(&accept, theta) >= value_estimate(&reject, theta))
}

/// Compares rollout estimates of both branches. A zero horizon falls back
/// to the plain value comparison.
#[allow(clippy::too_many_arguments)]
pub fn rollout_decide(
    cfg: &ProblemConfig,
    s: &PreDecisionState,
    theta: &[f64],
    features: &mut FeatureEngine,
    scheme: CfaScheme,
    params: RolloutParams,
    seed: u64,
) -> Result<bool, PolicyError> {
    if !fc_decide(cfg, s) {
        return Ok(false);
    }
    if params.horizon == 0 {
        return vfa_compare(cfg, s, theta, features, seed);
    }
    let r = s.request.request().expect("feasible request");
    let mut cache = FeasibilityCache::new();
    let accept_post = apply_demand_control(cfg, s, true).map_err(SimError::from)?;
    let reject_post = apply_demand_control(cfg, s, false).map_err(SimError::from)?;
    let accept = rollout_value(cfg, &accept_post, theta, features, scheme, params, seed, &mut cache)?;
    let reject = rollout_value(cfg, &reject_post, theta, features, scheme, params, seed, &mut cache)?;
    Ok(cfg.priority[r.customer] + accept >= reject)
}

pub fn dlp_decide(cfg: &ProblemConfig, s: &PreDecisionState, horizon: usize) -> Result<bool, PolicyError> {
    if !fc_decide(cfg, s) {
        return Ok(false);
    }
    let r = s.request.request().expect("feasible request");
    Ok(dlp_decide_request(cfg, s, r, horizon)?)
}

/// Runs one policy pair through an episode.
#[derive(Debug)]
pub struct PolicyRunner<'a> {
    cfg: &'a ProblemConfig,
    pair: &'a PolicyPair,
    features: FeatureEngine,
    seed: u64,
}

impl<'a> PolicyRunner<'a> {
    pub fn new(cfg: &'a ProblemConfig, pair: &'a PolicyPair, seed: u64) -> Self {
        Self {
            cfg,
            pair,
            features: FeatureEngine::new(pair.feature_scheme(), pair.params.scenarios),
            seed,
        }
    }

    fn theta(&self) -> Vec<f64> {
        self.pair.weights.as_ref().map_or_else(|| vec![0.0; self.cfg.feature_len()], |w| w.theta.clone())
    }

    pub fn demand(&mut self, s: &PreDecisionState) -> Result<bool, PolicyError> {
        let cfg = self.cfg;
        let seed = feature_seed(self.seed, s.day, s.slot);
        let rollout = RolloutParams {
            paths: self.pair.params.rollout_paths,
            horizon: self.pair.params.rollout_horizon,
        };
        match self.pair.control {
            DemandControl::FC => Ok(fc_decide(cfg, s)),
            DemandControl::DLP => dlp_decide(cfg, s, self.pair.params.dlp_horizon),
            DemandControl::V(_) => {
                let theta = self.theta();
                vfa_decide(cfg, s, &theta, &mut self.features, seed)
            }
            DemandControl::R | DemandControl::RV(_) => {
                let theta = self.theta();
                rollout_decide(cfg, s, &theta, &mut self.features, self.pair.allocation, rollout, derive_seed(&[seed, 0x7011]))
            }
        }
    }

    pub fn allocate(&mut self, s: &PreDecisionState) -> Result<AllocationPlan, PolicyError> {
        Ok(decide_allocation(self.cfg, &s.occupancy, &s.pending, self.pair.allocation)?)
    }
}
