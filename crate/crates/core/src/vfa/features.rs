use std::collections::HashMap;

use locker_optim::{ilp_solve, IlpOutcome, IntModel, OptimError, Sense, VarId};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::allocation::{add_window_accounting, solve_windows, window_weights_with, CfaScheme, Occupancy, WindowVars};
use crate::domain::{PostDecisionState, ProblemConfig};
use crate::stochastic::{derive_seed, elapsed_slots, residual_pickup_distribution, rng_for, sample_index};

/// `(1, ŵ[δ][λ])`, with λ running over the extended horizon and δ-major
/// order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector(pub Vec<f64>);

impl FeatureVector {
    pub fn zeros(cfg: &ProblemConfig) -> Self {
        Self(vec![0.0; cfg.feature_len()])
    }

    pub fn window(&self, cfg: &ProblemConfig, size: usize, len: usize) -> f64 {
        self.0[1 + size * cfg.extended_horizon() + len - 1]
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

pub fn value_estimate(phi: &FeatureVector, theta: &[f64]) -> f64 {
    debug_assert_eq!(phi.0.len(), theta.len());
    phi.0.iter().zip(theta).map(|(a, b)| a * b).sum()
}

/// Sampled pickup days for every parcel of a post-decision state.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SampledPickups {
    /// `locker[δ][c][h-1][β-1]`
    pub locker: Vec<Vec<Vec<Vec<u32>>>>,
    /// `orders[d][c][f-1][β-1]`
    pub orders: Vec<Vec<Vec<Vec<u32>>>>,
}

impl SampledPickups {
    pub fn empty(cfg: &ProblemConfig) -> Self {
        let b = cfg.max_storage;
        Self {
            locker: vec![vec![vec![vec![0; b]; b.saturating_sub(1)]; cfg.customers()]; cfg.sizes()],
            orders: vec![vec![vec![vec![0; b]; cfg.horizon()]; cfg.customers()]; cfg.sizes()],
        }
    }

    /// Draws β for locker parcels from the residual law and for pending
    /// orders from the unconditional law.
    pub fn sample(cfg: &ProblemConfig, sx: &PostDecisionState, rng: &mut impl Rng) -> Self {
        let mut out = Self::empty(cfg);
        let t = elapsed_slots(cfg, sx.slot);
        for (delta, c, h, n) in sx.occupancy.cells() {
            let law = residual_pickup_distribution(cfg, c, h, t).unwrap_or_else(|_| {
                let mut v = vec![0.0; cfg.max_storage];
                v[cfg.max_storage - 1] = 1.0;
                v
            });
            for _ in 0..n {
                let beta = sample_index(&law, rng.random::<f64>());
                out.locker[delta][c][h - 1][beta] += 1;
            }
        }
        for (d, c, f, n) in sx.pending.cells() {
            for _ in 0..n {
                let beta = sample_index(&cfg.pickup.day[c], rng.random::<f64>());
                out.orders[d][c][f - 1][beta] += 1;
            }
        }
        out
    }

    /// Locker parcels of size δ still present at epoch f.
    fn locker_present(&self, delta: usize, f: usize) -> i64 {
        let mut n = 0i64;
        for per_c in &self.locker[delta] {
            for (hi, betas) in per_c.iter().enumerate() {
                let h = hi + 1;
                for (bi, &k) in betas.iter().enumerate() {
                    if bi + 1 >= f + h {
                        n += k as i64;
                    }
                }
            }
        }
        n
    }
}

/// `ŷ[δ][c][f-1][β-1]` ids of a sampled tentative plan.
#[derive(Debug, Clone)]
pub struct FeaturePlanVars {
    pub y: Vec<Vec<Vec<Vec<VarId>>>>,
    pub windows: WindowVars,
}

/// Tentative plan with sampled pickups over the extended horizon and the
/// scheme's window objective.
pub fn feature_model(cfg: &ProblemConfig, scenario: &SampledPickups, scheme: CfaScheme) -> (IntModel, FeaturePlanVars) {
    let (nd, nc, nf, nb) = (cfg.sizes(), cfg.customers(), cfg.horizon(), cfg.max_storage);
    let horizon = cfg.extended_horizon();
    let mut model = IntModel::new();
    let compatible = |delta: usize, c: usize, f: usize, b: usize| -> u32 {
        (0..=delta).map(|d| scenario.orders[d][c][f][b]).sum()
    };
    let y: Vec<Vec<Vec<Vec<VarId>>>> = (0..nd)
        .map(|delta| {
            (0..nc)
                .map(|c| {
                    (0..nf)
                        .map(|f| {
                            (0..nb)
                                .map(|b| {
                                    let ub = compatible(delta, c, f, b).min(cfg.compartments[delta]);
                                    model.add_var(format!("y_{}_{}_{}_{}", delta + 1, c + 1, f + 1, b + 1), 0, ub as i64, 0.0)
                                })
                                .collect()
                        })
                        .collect()
                })
                .collect()
        })
        .collect();
    for c in 0..nc {
        for f in 0..nf {
            for b in 0..nb {
                if compatible(nd - 1, c, f, b) == 0 {
                    continue;
                }
                for delta in 0..nd - 1 {
                    let terms = (0..=delta).map(|j| (y[j][c][f][b], 1)).collect();
                    model.add_constraint("order_mix", terms, Sense::Le, compatible(delta, c, f, b) as i64);
                }
                let terms = (0..nd).map(|j| (y[j][c][f][b], 1)).collect();
                model.add_constraint("all", terms, Sense::Eq, compatible(nd - 1, c, f, b) as i64);
            }
        }
    }
    let at = |delta: usize, f: usize| -> (Vec<(VarId, i64)>, i64) {
        let mut terms = Vec::new();
        for c in 0..nc {
            for j in 1..=f.min(nf) {
                for beta in (f - j + 1)..=nb {
                    terms.push((y[delta][c][j - 1][beta - 1], 1));
                }
            }
        }
        (terms, scenario.locker_present(delta, f))
    };
    let starting = |delta: usize, f: usize| -> Vec<(VarId, i64)> {
        if f > nf {
            return Vec::new();
        }
        (0..nc).flat_map(|c| (0..nb).map(move |b| (c, b))).map(|(c, b)| (y[delta][c][f - 1][b], 1)).collect()
    };
    let forbidden = (horizon > nf).then(|| (nf, horizon - 1));
    let windows = add_window_accounting(
        &mut model,
        &cfg.compartments,
        horizon,
        &Occupancy {
            at: &at,
            starting: &starting,
        },
        nf,
        forbidden,
        None,
    );
    match scheme {
        CfaScheme::BU => {
            for (delta, s) in windows.free.iter().enumerate() {
                model.set_objective(s[0], (delta + 1) as f64);
            }
        }
        s => {
            let w = window_weights_with(s, &cfg.compartments, horizon, None).expect("window scheme");
            for (delta, row) in windows.total.iter().enumerate() {
                for (k, &id) in row.iter().enumerate() {
                    model.set_objective(id, w.v[delta][k]);
                }
            }
        }
    }
    (model, FeaturePlanVars { y, windows })
}

/// Window counts `[δ][λ-1]` of one scenario's optimal plan.
pub fn scenario_windows(
    cfg: &ProblemConfig,
    scenario: &SampledPickups,
    scheme: CfaScheme,
) -> Result<Vec<Vec<u32>>, OptimError> {
    let (model, vars) = feature_model(cfg, scenario, scheme);
    let outcome = match scheme {
        CfaScheme::BU => ilp_solve(&model)?,
        s => {
            let w = window_weights_with(s, &cfg.compartments, cfg.extended_horizon(), None).expect("window scheme");
            solve_windows(&model, &vars.windows.total, &w)?
        }
    };
    match outcome {
        IlpOutcome::Optimal { assignment, .. } => Ok(vars
            .windows
            .total
            .iter()
            .map(|r| r.iter().map(|&id| assignment[id] as u32).collect())
            .collect()),
        IlpOutcome::Infeasible => Err(OptimError::Numerical("sampled tentative plan has no solution".into())),
    }
}

/// Feature computation with a memo of scenario solutions. Solutions depend
/// only on the scenario, so the memo can live across epochs.
#[derive(Debug)]
pub struct FeatureEngine {
    pub scheme: CfaScheme,
    pub scenarios: usize,
    memo: HashMap<SampledPickups, Vec<Vec<u32>>>,
    memo_limit: usize,
}

impl FeatureEngine {
    pub fn new(scheme: CfaScheme, scenarios: usize) -> Self {
        Self {
            scheme,
            scenarios,
            memo: HashMap::new(),
            memo_limit: 200_000,
        }
    }

    pub fn windows(&mut self, cfg: &ProblemConfig, scenario: SampledPickups) -> Result<Vec<Vec<u32>>, OptimError> {
        if let Some(w) = self.memo.get(&scenario) {
            return Ok(w.clone());
        }
        let w = scenario_windows(cfg, &scenario, self.scheme)?;
        if self.memo.len() >= self.memo_limit {
            self.memo.clear();
        }
        self.memo.insert(scenario, w.clone());
        Ok(w)
    }

    /// Mean window counts over `U` scenarios seeded by `seed` and the
    /// scenario index.
    pub fn compute(&mut self, cfg: &ProblemConfig, sx: &PostDecisionState, seed: u64) -> Result<FeatureVector, OptimError> {
        let horizon = cfg.extended_horizon();
        let mut phi = FeatureVector::zeros(cfg);
        phi.0[0] = 1.0;
        for u in 0..self.scenarios {
            let mut rng = rng_for(&[seed, u as u64]);
            let scenario = SampledPickups::sample(cfg, sx, &mut rng);
            let w = self.windows(cfg, scenario)?;
            for (delta, row) in w.iter().enumerate() {
                for (k, &n) in row.iter().enumerate() {
                    phi.0[1 + delta * horizon + k] += n as f64;
                }
            }
        }
        let u = self.scenarios.max(1) as f64;
        for v in &mut phi.0[1..] {
            *v /= u;
        }
        Ok(phi)
    }
}

/// Stateless feature computation.
pub fn compute_features(
    cfg: &ProblemConfig,
    sx: &PostDecisionState,
    scenarios: usize,
    seed: u64,
    scheme: CfaScheme,
) -> Result<FeatureVector, OptimError> {
    FeatureEngine::new(scheme, scenarios).compute(cfg, sx, seed)
}

/// Seed of one feature computation.
pub fn feature_seed(base: u64, day: u32, slot: usize) -> u64 {
    derive_seed(&[base, day as u64, slot as u64])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{ArrivalLaw, Layout, PickupLaw, Setting};

    fn single(f: usize, b: usize) -> ProblemConfig {
        ProblemConfig {
            compartments: vec![1],
            priority: vec![1.0],
            max_lead: f,
            max_storage: b,
            slots: 2,
            arrival: ArrivalLaw {
                customer: vec![1.0],
                size: vec![vec![1.0]],
                lead: vec![vec![1.0 / f as f64; f]],
            },
            pickup: PickupLaw {
                day: vec![vec![1.0 / b as f64; b]],
            },
        }
    }

    #[test]
    fn main_feature_length() {
        let cfg = Layout::main().config(Setting::parse("1id").unwrap());
        assert_eq!(cfg.feature_len(), 22);
    }

    #[test]
    fn empty_system_has_full_windows() {
        let cfg = Layout::desk().config(Setting::parse("3pu").unwrap());
        for scheme in CfaScheme::ALL {
            let phi = compute_features(&cfg, &PostDecisionState::empty(&cfg, 1, 3), 4, 7, scheme).unwrap();
            let h = cfg.extended_horizon();
            for delta in 0..cfg.sizes() {
                for len in 1..=h {
                    let want = if len == h { cfg.compartments[delta] as f64 } else { 0.0 };
                    assert_eq!(phi.window(&cfg, delta, len), want, "{scheme:?} {delta} {len}");
                }
            }
        }
    }

    #[test]
    fn one_order_picked_up_after_a_day() {
        let cfg = single(2, 2);
        let mut s = SampledPickups::empty(&cfg);
        s.orders[0][0][0][0] = 1;
        for scheme in CfaScheme::ALL {
            let w = scenario_windows(&cfg, &s, scheme).unwrap();
            assert_eq!(w, vec![vec![0, 1, 0]], "{scheme:?}");
        }
    }

    #[test]
    fn locker_parcel_presence_follows_beta() {
        let cfg = single(2, 3);
        let mut s = SampledPickups::empty(&cfg);
        // dwell 1, pickup three days after allocation: present at epochs 1 and 2.
        s.locker[0][0][0][2] = 1;
        assert_eq!(s.locker_present(0, 1), 1);
        assert_eq!(s.locker_present(0, 2), 1);
        assert_eq!(s.locker_present(0, 3), 0);
        let w = scenario_windows(&cfg, &s, CfaScheme::DL).unwrap();
        assert_eq!(w, vec![vec![0, 1, 0, 0]]);
    }

    #[test]
    fn value_estimate_is_a_dot_product() {
        let phi = FeatureVector(vec![1.0, 2.0, 0.5]);
        assert_eq!(value_estimate(&phi, &[0.0; 3]), 0.0);
        assert_eq!(value_estimate(&phi, &[2.0, 0.0, 0.0]), 2.0);
        assert_eq!(value_estimate(&phi, &[1.0, -1.0, 4.0]), 1.0);
    }

    #[test]
    fn fixed_seed_reproduces_features() {
        let cfg = Layout::desk().config(Setting::parse("2pf").unwrap());
        let mut sx = PostDecisionState::empty(&cfg, 1, 4);
        sx.occupancy.set(0, 1, 1, 2);
        sx.occupancy.set(2, 0, 2, 1);
        sx.pending.set(1, 0, 2, 1);
        sx.pending.set(0, 1, 1, 1);
        let a = compute_features(&cfg, &sx, 5, 11, CfaScheme::LD).unwrap();
        let b = compute_features(&cfg, &sx, 5, 11, CfaScheme::LD).unwrap();
        assert_eq!(a, b);
        let h = cfg.extended_horizon() as f64;
        for delta in 0..cfg.sizes() {
            let used: f64 = (1..=cfg.extended_horizon()).map(|l| l as f64 * a.window(&cfg, delta, l)).sum();
            assert!(used <= h * cfg.compartments[delta] as f64 + 1e-9);
        }
    }
}
