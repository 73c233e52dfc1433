use locker_optim::{ilp_solve, IlpOutcome, IntModel, OptimError, Sense, VarId};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::feasibility::{add_plan_vars, worst_case_occupancy, PlanVars};
use super::windows::{add_window_accounting, Fault, Occupancy, WindowVars};
use crate::domain::{AllocationPlan, LockerOccupancy, PendingOrders, ProblemConfig};

/// Below this, the scaled secondary objective is solved in a second stage
/// instead of being folded into the weights.
pub const MIN_SECONDARY_WEIGHT: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CfaScheme {
    /// Compartment size first, then window length.
    DL,
    /// Window length first, then compartment size.
    LD,
    /// Keep the smallest compatible compartment free for the next day.
    BU,
}

impl CfaScheme {
    pub const ALL: [CfaScheme; 3] = [CfaScheme::DL, CfaScheme::LD, CfaScheme::BU];

    pub fn code(self) -> &'static str {
        match self {
            CfaScheme::DL => "DL",
            CfaScheme::LD => "LD",
            CfaScheme::BU => "BU",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|x| x.code() == s)
    }
}

impl std::fmt::Display for CfaScheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.code())
    }
}

#[derive(Debug, Error)]
pub enum AllocationError {
    #[error("no allocation exists for this state")]
    Infeasible,
    #[error("BU has no window weights")]
    NoWindowWeights,
    #[error(transparent)]
    Solver(#[from] OptimError),
}

/// Lexicographic window weights `v[δ][λ-1] = primary + secondary / bound`.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowWeights {
    pub primary: Vec<Vec<i64>>,
    pub secondary: Vec<Vec<i64>>,
    pub bound: f64,
    pub v: Vec<Vec<f64>>,
}

impl WindowWeights {
    /// Whether the folded weights are safe to use in one solve.
    pub fn single_stage(&self) -> bool {
        1.0 / self.bound >= MIN_SECONDARY_WEIGHT
    }
}

/// Upper bound on `Σ δλ·w` over a horizon: every compartment free throughout.
pub fn size_bound(capacity: &[u32], horizon: usize) -> f64 {
    1.0 + capacity
        .iter()
        .enumerate()
        .map(|(d, &q)| ((d + 1) * horizon) as f64 * q as f64)
        .sum::<f64>()
}

/// Upper bound on `Σ (2λ-1)·w` over a horizon.
pub fn length_bound(capacity: &[u32], horizon: usize) -> f64 {
    1.0 + (2 * horizon - 1) as f64 * capacity.iter().map(|&q| q as f64).sum::<f64>()
}

pub(crate) fn window_weights_with(
    scheme: CfaScheme,
    capacity: &[u32],
    horizon: usize,
    fault: Option<Fault>,
) -> Result<WindowWeights, AllocationError> {
    let grid = |f: &dyn Fn(usize, usize) -> i64| -> Vec<Vec<i64>> {
        (1..=capacity.len()).map(|d| (1..=horizon).map(|l| f(d, l)).collect()).collect()
    };
    let size_len = grid(&|d, l| (d * l) as i64);
    let length = grid(&|_, l| (2 * l - 1) as i64);
    let (primary, secondary, bound) = match scheme {
        CfaScheme::DL => (size_len, length, length_bound(capacity, horizon)),
        CfaScheme::LD => (length, size_len, size_bound(capacity, horizon)),
        CfaScheme::BU => return Err(AllocationError::NoWindowWeights),
    };
    let bound = if fault == Some(Fault::WrongUpperBound) { 1.0 } else { bound };
    let v = primary
        .iter()
        .zip(&secondary)
        .map(|(p, s)| p.iter().zip(s).map(|(&a, &b)| a as f64 + b as f64 / bound).collect())
        .collect();
    Ok(WindowWeights {
        primary,
        secondary,
        bound,
        v,
    })
}

/// Window weights of a scheme over the pending-order horizon.
pub fn cfa_coefficients(scheme: CfaScheme, cfg: &ProblemConfig) -> Result<WindowWeights, AllocationError> {
    window_weights_with(scheme, &cfg.compartments, cfg.horizon(), None)
}

/// Variable ids of an allocation model.
#[derive(Debug, Clone)]
pub struct CfaVars {
    /// `a[d][δ][c]`, `None` below the diagonal.
    pub a: Vec<Vec<Vec<Option<VarId>>>>,
    pub plan: PlanVars,
    pub windows: WindowVars,
}

impl CfaVars {
    pub fn allocation(&self, cfg: &ProblemConfig, x: &[i64]) -> AllocationPlan {
        let mut plan = AllocationPlan::empty(cfg);
        for (d, row) in self.a.iter().enumerate() {
            for (delta, cols) in row.iter().enumerate() {
                for (c, id) in cols.iter().enumerate() {
                    if let Some(id) = id {
                        plan.set(d, delta, c, x[*id] as u32);
                    }
                }
            }
        }
        plan
    }

    /// Window counts `[δ][λ-1]` of a solution.
    pub fn window_counts(&self, x: &[i64]) -> Vec<Vec<i64>> {
        self.windows.total.iter().map(|r| r.iter().map(|&id| x[id]).collect()).collect()
    }
}

/// The allocation decision space with window accounting, without an
/// objective.
pub(crate) fn cfa_constraints(
    cfg: &ProblemConfig,
    l: &LockerOccupancy,
    o: &PendingOrders,
    fault: Option<Fault>,
) -> (IntModel, CfaVars) {
    let (nd, nc) = (cfg.sizes(), cfg.customers());
    let mut model = IntModel::new();
    let a: Vec<Vec<Vec<Option<VarId>>>> = (0..nd)
        .map(|d| {
            (0..nd)
                .map(|delta| {
                    (0..nc)
                        .map(|c| {
                            (delta >= d).then(|| {
                                let ub = o.get(d, c, 1).min(cfg.compartments[delta]);
                                model.add_var(format!("a_{}_{}_{}", d + 1, delta + 1, c + 1), 0, ub as i64, 0.0)
                            })
                        })
                        .collect()
                })
                .collect()
        })
        .collect();
    let plan = add_plan_vars(&mut model, cfg, o);
    for c in 0..nc {
        for delta in 0..nd {
            let mut terms: Vec<(VarId, i64)> = (0..=delta).filter_map(|d| a[d][delta][c]).map(|id| (id, 1)).collect();
            terms.push((plan.y[delta][c][0], -1));
            model.add_constraint(format!("alloc_y_{}_{}", delta + 1, c + 1), terms, Sense::Eq, 0);
        }
        for d in 0..nd {
            let terms = (d..nd).filter_map(|delta| a[d][delta][c]).map(|id| (id, 1)).collect();
            model.add_constraint(format!("alloc_o_{}_{}", d + 1, c + 1), terms, Sense::Eq, o.get(d, c, 1) as i64);
        }
    }
    let at = |delta: usize, f: usize| worst_case_occupancy(cfg, l, &plan, delta, f);
    let starting = |delta: usize, f: usize| -> Vec<(VarId, i64)> { (0..nc).map(|c| (plan.y[delta][c][f - 1], 1)).collect() };
    let windows = add_window_accounting(
        &mut model,
        &cfg.compartments,
        cfg.horizon(),
        &Occupancy {
            at: &at,
            starting: &starting,
        },
        cfg.horizon(),
        None,
        fault,
    );
    (model, CfaVars { a, plan, windows })
}

/// Sets the scheme's objective on a model built by [`cfa_constraints`].
pub(crate) fn set_cfa_objective(model: &mut IntModel, vars: &WindowVars, scheme: CfaScheme, weights: Option<&WindowWeights>) {
    match scheme {
        CfaScheme::BU => {
            for (delta, s) in vars.free.iter().enumerate() {
                model.set_objective(s[0], (delta + 1) as f64);
            }
        }
        _ => {
            let w = weights.expect("window weights");
            for (delta, row) in vars.total.iter().enumerate() {
                for (k, &id) in row.iter().enumerate() {
                    model.set_objective(id, w.v[delta][k]);
                }
            }
        }
    }
}

pub fn cfa_model(cfg: &ProblemConfig, l: &LockerOccupancy, o: &PendingOrders, scheme: CfaScheme) -> (IntModel, CfaVars) {
    cfa_model_with(cfg, l, o, scheme, None)
}

#[doc(hidden)]
pub fn cfa_model_with(
    cfg: &ProblemConfig,
    l: &LockerOccupancy,
    o: &PendingOrders,
    scheme: CfaScheme,
    fault: Option<Fault>,
) -> (IntModel, CfaVars) {
    let (mut model, vars) = cfa_constraints(cfg, l, o, fault);
    let weights = match scheme {
        CfaScheme::BU => None,
        s => Some(window_weights_with(s, &cfg.compartments, cfg.horizon(), fault).expect("window scheme")),
    };
    set_cfa_objective(&mut model, &vars.windows, scheme, weights.as_ref());
    (model, vars)
}

/// Maximizes `primary·W`, then `secondary·W` with the primary value held.
pub fn solve_two_stage(
    model: &IntModel,
    totals: &[Vec<VarId>],
    primary: &[Vec<i64>],
    secondary: &[Vec<i64>],
) -> Result<IlpOutcome, OptimError> {
    let mut stage = model.clone();
    stage.feasibility_only = false;
    stage.objective.iter_mut().for_each(|c| *c = 0.0);
    let pairs: Vec<(VarId, i64, i64)> = totals
        .iter()
        .zip(primary.iter().zip(secondary))
        .flat_map(|(ids, (p, s))| ids.iter().zip(p.iter().zip(s)).map(|(&id, (&a, &b))| (id, a, b)))
        .collect();
    for &(id, a, _) in &pairs {
        stage.objective[id] = a as f64;
    }
    let first = ilp_solve(&stage)?;
    let IlpOutcome::Optimal { objective, .. } = first else {
        return Ok(IlpOutcome::Infeasible);
    };
    let best = objective.round() as i64;
    stage.add_constraint("primary_level", pairs.iter().map(|&(id, a, _)| (id, a)).collect(), Sense::Ge, best);
    for &(id, _, b) in &pairs {
        stage.objective[id] = b as f64;
    }
    ilp_solve(&stage)
}

/// Solves a window model for a DL/LD scheme, falling back to two stages when
/// the folded secondary weights are too small.
pub(crate) fn solve_windows(
    model: &IntModel,
    totals: &[Vec<VarId>],
    weights: &WindowWeights,
) -> Result<IlpOutcome, OptimError> {
    if weights.single_stage() {
        ilp_solve(model)
    } else {
        solve_two_stage(model, totals, &weights.primary, &weights.secondary)
    }
}

/// Solves the allocation model and returns the first-epoch assignment.
pub fn decide_allocation(
    cfg: &ProblemConfig,
    l: &LockerOccupancy,
    o: &PendingOrders,
    scheme: CfaScheme,
) -> Result<AllocationPlan, AllocationError> {
    let (model, vars) = cfa_model(cfg, l, o, scheme);
    let outcome = match scheme {
        CfaScheme::BU => ilp_solve(&model)?,
        s => solve_windows(&model, &vars.windows.total, &cfa_coefficients(s, cfg)?)?,
    };
    match outcome {
        IlpOutcome::Optimal { assignment, .. } => Ok(vars.allocation(cfg, &assignment)),
        IlpOutcome::Infeasible => Err(AllocationError::Infeasible),
    }
}

/// Whether a given first-epoch assignment extends to a full plan.
pub fn is_allocatable(cfg: &ProblemConfig, l: &LockerOccupancy, o: &PendingOrders, plan: &AllocationPlan) -> bool {
    let (mut model, vars) = cfa_constraints(cfg, l, o, None);
    model.feasibility_only = true;
    for (d, row) in vars.a.iter().enumerate() {
        for (delta, cols) in row.iter().enumerate() {
            for (c, id) in cols.iter().enumerate() {
                let want = plan.get(d, delta, c) as i64;
                match id {
                    Some(id) => model.add_constraint("fix_a", vec![(*id, 1)], Sense::Eq, want),
                    None if want != 0 => return false,
                    None => {}
                }
            }
        }
    }
    ilp_solve(&model).map(|r| r.is_feasible()).unwrap_or(false)
}
