use std::collections::HashMap;

use locker_optim::{ilp_solve, IntModel, Sense, VarId};

use crate::domain::{LockerOccupancy, PendingOrders, ProblemConfig, Request};

/// `y[δ][c][f-1]` variable ids of a tentative plan.
#[derive(Debug, Clone)]
pub struct PlanVars {
    pub y: Vec<Vec<Vec<VarId>>>,
}

/// Parcels of customer `c` due at epoch `f` that fit a size-δ compartment.
pub(crate) fn compatible_orders(o: &PendingOrders, delta: usize, c: usize, f: usize) -> u32 {
    (0..=delta).map(|d| o.get(d, c, f)).sum()
}

/// Adds `y` variables plus the order compatibility and full-allocation
/// rows for every epoch of the pending horizon.
pub(crate) fn add_plan_vars(model: &mut IntModel, cfg: &ProblemConfig, o: &PendingOrders) -> PlanVars {
    let (nd, nc, nf) = (cfg.sizes(), cfg.customers(), cfg.horizon());
    let y: Vec<Vec<Vec<VarId>>> = (0..nd)
        .map(|delta| {
            (0..nc)
                .map(|c| {
                    (1..=nf)
                        .map(|f| {
                            let ub = compatible_orders(o, delta, c, f).min(cfg.compartments[delta]);
                            model.add_var(format!("y_{}_{}_{f}", delta + 1, c + 1), 0, ub as i64, 0.0)
                        })
                        .collect()
                })
                .collect()
        })
        .collect();
    for c in 0..nc {
        for f in 1..=nf {
            for delta in 0..nd.saturating_sub(1) {
                let terms = (0..=delta).map(|j| (y[j][c][f - 1], 1)).collect();
                let rhs = compatible_orders(o, delta, c, f) as i64;
                model.add_constraint(format!("order_mix_{}_{}_{f}", delta + 1, c + 1), terms, Sense::Le, rhs);
            }
            let terms = (0..nd).map(|j| (y[j][c][f - 1], 1)).collect();
            let rhs = compatible_orders(o, nd - 1, c, f) as i64;
            model.add_constraint(format!("all_{}_{f}", c + 1), terms, Sense::Eq, rhs);
        }
    }
    PlanVars { y }
}

/// Worst-case occupancy of size δ at epoch f: blocks allocated in the last
/// B epochs, plus locker parcels whose worst-case stay reaches f.
pub(crate) fn worst_case_occupancy(
    cfg: &ProblemConfig,
    l: &LockerOccupancy,
    plan: &PlanVars,
    delta: usize,
    f: usize,
) -> (Vec<(VarId, i64)>, i64) {
    let b = cfg.max_storage;
    let first = (f + 1).saturating_sub(b).max(1);
    let mut terms = Vec::new();
    for c in 0..cfg.customers() {
        for j in first..=f {
            terms.push((plan.y[delta][c][j - 1], 1));
        }
    }
    let mut constant = 0i64;
    for c in 0..cfg.customers() {
        for h in 1..b {
            if f + h <= b {
                constant += l.get(delta, c, h) as i64;
            }
        }
    }
    (terms, constant)
}

/// Capacity, compatibility and full-allocation system for the pending
/// orders `o` (already including any candidate request).
pub fn feasibility_model(cfg: &ProblemConfig, l: &LockerOccupancy, o: &PendingOrders) -> (IntModel, PlanVars) {
    let mut model = IntModel::feasibility();
    let plan = add_plan_vars(&mut model, cfg, o);
    for delta in 0..cfg.sizes() {
        for f in 1..=cfg.horizon() {
            let (terms, constant) = worst_case_occupancy(cfg, l, &plan, delta, f);
            model.add_constraint(
                format!("cap_{}_{f}", delta + 1),
                terms,
                Sense::Le,
                cfg.compartments[delta] as i64 - constant,
            );
        }
    }
    (model, plan)
}

/// Whether the pending orders plus `request` admit a worst-case plan.
pub fn check_feasible(cfg: &ProblemConfig, l: &LockerOccupancy, o: &PendingOrders, request: Option<&Request>) -> bool {
    let extended;
    let orders = match request {
        Some(r) => {
            if r.lead == 0 || r.lead > cfg.horizon() || r.size >= cfg.sizes() {
                return false;
            }
            extended = o.with_request(r);
            &extended
        }
        None => o,
    };
    let (model, _) = feasibility_model(cfg, l, orders);
    ilp_solve(&model).map(|r| r.is_feasible()).unwrap_or(false)
}

/// Memo of feasibility answers for one decision epoch.
#[derive(Debug, Default)]
pub struct FeasibilityCache {
    answers: HashMap<(LockerOccupancy, PendingOrders, Option<Request>), bool>,
}

impl FeasibilityCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn check(&mut self, cfg: &ProblemConfig, l: &LockerOccupancy, o: &PendingOrders, r: Option<&Request>) -> bool {
        let key = (l.clone(), o.clone(), r.copied());
        if let Some(&v) = self.answers.get(&key) {
            return v;
        }
        let v = check_feasible(cfg, l, o, r);
        self.answers.insert(key, v);
        v
    }

    pub fn len(&self) -> usize {
        self.answers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.answers.is_empty()
    }
}
