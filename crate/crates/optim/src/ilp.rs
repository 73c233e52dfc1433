//! Depth-first branch and bound over the bounded integer box.
//!
//! Every node runs activity-based bound propagation and then the LP
//! relaxation of the remaining free variables, which supplies both the
//! objective bound and the branching variable.

use crate::model::{IntModel, Sense};
use crate::simplex::{self, BoundedLp, Row, SimplexResult};
use crate::OptimError;

const INTEGRAL_TOL: f64 = 1e-6;
const IMPROVE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub enum IlpOutcome {
    Optimal { assignment: Vec<i64>, objective: f64 },
    Infeasible,
}

impl IlpOutcome {
    pub fn assignment(&self) -> Option<&[i64]> {
        match self {
            IlpOutcome::Optimal { assignment, .. } => Some(assignment),
            IlpOutcome::Infeasible => None,
        }
    }

    pub fn is_feasible(&self) -> bool {
        matches!(self, IlpOutcome::Optimal { .. })
    }
}

struct Node {
    lo: Vec<i64>,
    hi: Vec<i64>,
}

/// Tightens bounds to a fixpoint. Returns false when the box is empty.
fn propagate(model: &IntModel, lo: &mut [i64], hi: &mut [i64]) -> bool {
    if lo.iter().zip(hi.iter()).any(|(l, h)| l > h) {
        return false;
    }
    for _ in 0..64 {
        let mut changed = false;
        for con in &model.constraints {
            let mut min_act = 0i64;
            let mut max_act = 0i64;
            for &(j, a) in &con.terms {
                if a > 0 {
                    min_act += a * lo[j];
                    max_act += a * hi[j];
                } else {
                    min_act += a * hi[j];
                    max_act += a * lo[j];
                }
            }
            let upper_side = matches!(con.sense, Sense::Le | Sense::Eq);
            let lower_side = matches!(con.sense, Sense::Ge | Sense::Eq);
            if (upper_side && min_act > con.rhs) || (lower_side && max_act < con.rhs) {
                return false;
            }
            if upper_side {
                let slack = con.rhs - min_act;
                for &(j, a) in &con.terms {
                    if a > 0 {
                        let bound = lo[j] + slack / a;
                        if bound < hi[j] {
                            hi[j] = bound;
                            changed = true;
                        }
                    } else if a < 0 {
                        let bound = hi[j] - slack / -a;
                        if bound > lo[j] {
                            lo[j] = bound;
                            changed = true;
                        }
                    }
                }
            }
            if lower_side {
                // Recompute from current bounds; the upper pass may have moved them.
                let mut max_act = 0i64;
                for &(j, a) in &con.terms {
                    max_act += if a > 0 { a * hi[j] } else { a * lo[j] };
                }
                if max_act < con.rhs {
                    return false;
                }
                let slack = max_act - con.rhs;
                for &(j, a) in &con.terms {
                    if a > 0 {
                        let bound = hi[j] - slack / a;
                        if bound > lo[j] {
                            lo[j] = bound;
                            changed = true;
                        }
                    } else if a < 0 {
                        let bound = lo[j] + slack / -a;
                        if bound < hi[j] {
                            hi[j] = bound;
                            changed = true;
                        }
                    }
                }
            }
            if changed && lo.iter().zip(hi.iter()).any(|(l, h)| l > h) {
                return false;
            }
        }
        if !changed {
            break;
        }
    }
    true
}

enum Relaxation {
    Infeasible,
    Solved { x: Vec<f64>, bound: f64 },
}

fn relax(model: &IntModel, lo: &[i64], hi: &[i64]) -> Result<Relaxation, OptimError> {
    let n = model.num_vars();
    let mut col_of = vec![usize::MAX; n];
    let mut free = Vec::new();
    for j in 0..n {
        if lo[j] < hi[j] {
            col_of[j] = free.len();
            free.push(j);
        }
    }
    let mut constant = 0.0;
    for j in 0..n {
        if lo[j] == hi[j] {
            constant += model.objective[j] * lo[j] as f64;
        }
    }
    let mut rows = Vec::new();
    for con in &model.constraints {
        let mut terms = Vec::new();
        let mut rhs = con.rhs;
        for &(j, a) in &con.terms {
            if col_of[j] == usize::MAX {
                rhs -= a * lo[j];
            } else {
                terms.push((col_of[j], a as f64));
            }
        }
        if terms.is_empty() {
            if !con.sense.holds(0, rhs) {
                return Ok(Relaxation::Infeasible);
            }
            continue;
        }
        rows.push(Row {
            terms,
            sense: con.sense,
            rhs: rhs as f64,
        });
    }
    let objective: Vec<f64> = if model.feasibility_only {
        vec![0.0; free.len()]
    } else {
        free.iter().map(|&j| model.objective[j]).collect()
    };
    let lower: Vec<f64> = free.iter().map(|&j| lo[j] as f64).collect();
    let upper: Vec<f64> = free.iter().map(|&j| hi[j] as f64).collect();
    let lp = BoundedLp {
        objective: &objective,
        lower: &lower,
        upper: &upper,
        rows: &rows,
    };
    match simplex::solve(&lp)? {
        SimplexResult::Infeasible => Ok(Relaxation::Infeasible),
        SimplexResult::Unbounded => Err(OptimError::Numerical(
            "relaxation of a bounded box reported unbounded".into(),
        )),
        SimplexResult::Optimal { x: xf, objective } => {
            let mut x: Vec<f64> = lo.iter().map(|&v| v as f64).collect();
            for (k, &j) in free.iter().enumerate() {
                x[j] = xf[k];
            }
            Ok(Relaxation::Solved {
                x,
                bound: objective + if model.feasibility_only { 0.0 } else { constant },
            })
        }
    }
}

/// Solves a bounded integer maximization exactly.
///
/// The search order is fixed, so identical models return identical
/// assignments; among equal-valued integer points the first one found is kept.
pub fn ilp_solve(model: &IntModel) -> Result<IlpOutcome, OptimError> {
    model.validate()?;
    let n = model.num_vars();
    let root = Node {
        lo: model.vars.iter().map(|v| v.lower).collect(),
        hi: model.vars.iter().map(|v| v.upper).collect(),
    };
    let mut stack = vec![root];
    let mut best: Option<(Vec<i64>, f64)> = None;

    while let Some(mut node) = stack.pop() {
        if !propagate(model, &mut node.lo, &mut node.hi) {
            continue;
        }
        let prune = |bound: f64, best: &Option<(Vec<i64>, f64)>| match best {
            Some((_, inc)) => bound <= inc + IMPROVE_TOL * (1.0 + inc.abs()),
            None => false,
        };
        if node.lo == node.hi {
            let x = node.lo;
            if model.is_feasible(&x) {
                let value = model.evaluate(&x);
                if model.feasibility_only {
                    return Ok(IlpOutcome::Optimal {
                        objective: value,
                        assignment: x,
                    });
                }
                if !prune(value, &best) {
                    best = Some((x, value));
                }
            }
            continue;
        }
        let (x, bound) = match relax(model, &node.lo, &node.hi)? {
            Relaxation::Infeasible => continue,
            Relaxation::Solved { x, bound } => (x, bound),
        };
        if !model.feasibility_only && prune(bound, &best) {
            continue;
        }
        let fractional = (0..n).find(|&j| (x[j] - x[j].round()).abs() > INTEGRAL_TOL);
        let (j, split, up_first) = match fractional {
            Some(j) => {
                let fl = x[j].floor();
                (j, fl as i64, x[j] - fl >= 0.5)
            }
            None => {
                let rounded: Vec<i64> = (0..n)
                    .map(|j| (x[j].round() as i64).clamp(node.lo[j], node.hi[j]))
                    .collect();
                if model.is_feasible(&rounded) {
                    let value = model.evaluate(&rounded);
                    if model.feasibility_only {
                        return Ok(IlpOutcome::Optimal {
                            objective: value,
                            assignment: rounded,
                        });
                    }
                    if !prune(value, &best) {
                        best = Some((rounded, value));
                    }
                    continue;
                }
                // Rounding broke a constraint: split the first free variable.
                let j = (0..n).find(|&j| node.lo[j] < node.hi[j]).expect("free variable");
                let v = rounded[j];
                let split = if v >= node.hi[j] { v - 1 } else { v };
                (j, split, false)
            }
        };
        let mut down = Node {
            lo: node.lo.clone(),
            hi: node.hi.clone(),
        };
        down.hi[j] = split;
        let mut up = node;
        up.lo[j] = split + 1;
        if up_first {
            stack.push(down);
            stack.push(up);
        } else {
            stack.push(up);
            stack.push(down);
        }
    }

    Ok(match best {
        Some((assignment, objective)) => IlpOutcome::Optimal {
            assignment,
            objective,
        },
        None => IlpOutcome::Infeasible,
    })
}
