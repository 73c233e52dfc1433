use crate::model::Sense;
use crate::simplex::{self, BoundedLp, Row, SimplexResult};
use crate::OptimError;

/// Maximization over continuous variables `0 <= x_j <= upper_j`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LpModel {
    pub names: Vec<String>,
    pub upper: Vec<f64>,
    pub objective: Vec<f64>,
    pub rows: Vec<(Vec<(usize, f64)>, Sense, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome {
    Optimal { x: Vec<f64>, objective: f64 },
    Infeasible,
    Unbounded,
}

impl LpOutcome {
    pub fn objective(&self) -> Option<f64> {
        match self {
            LpOutcome::Optimal { objective, .. } => Some(*objective),
            _ => None,
        }
    }
}

impl LpModel {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_var(&mut self, name: impl Into<String>, obj: f64) -> usize {
        self.add_bounded_var(name, obj, f64::INFINITY)
    }

    pub fn add_bounded_var(&mut self, name: impl Into<String>, obj: f64, upper: f64) -> usize {
        self.names.push(name.into());
        self.objective.push(obj);
        self.upper.push(upper);
        self.objective.len() - 1
    }

    pub fn add_row(&mut self, terms: Vec<(usize, f64)>, sense: Sense, rhs: f64) {
        self.rows.push((terms, sense, rhs));
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }
}

pub fn lp_solve(model: &LpModel) -> Result<LpOutcome, OptimError> {
    let n = model.num_vars();
    if model.upper.len() != n {
        return Err(OptimError::Malformed("upper bound count mismatch".into()));
    }
    let finite = model.objective.iter().all(|c| c.is_finite())
        && model.upper.iter().all(|u| !u.is_nan() && *u >= 0.0)
        && model
            .rows
            .iter()
            .all(|(t, _, b)| b.is_finite() && t.iter().all(|&(j, a)| j < n && a.is_finite()));
    if !finite {
        return Err(OptimError::Malformed("non-finite or out-of-range LP data".into()));
    }
    let rows: Vec<Row> = model
        .rows
        .iter()
        .map(|(terms, sense, rhs)| Row {
            terms: terms.clone(),
            sense: *sense,
            rhs: *rhs,
        })
        .collect();
    let lower = vec![0.0; n];
    let lp = BoundedLp {
        objective: &model.objective,
        lower: &lower,
        upper: &model.upper,
        rows: &rows,
    };
    Ok(match simplex::solve(&lp)? {
        SimplexResult::Optimal { x, objective } => LpOutcome::Optimal { x, objective },
        SimplexResult::Infeasible => LpOutcome::Infeasible,
        SimplexResult::Unbounded => LpOutcome::Unbounded,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_bound() {
        let mut m = LpModel::new();
        let x = m.add_var("x", 1.0);
        m.add_row(vec![(x, 1.0)], Sense::Le, 3.0);
        assert_eq!(lp_solve(&m).unwrap().objective(), Some(3.0));
    }

    #[test]
    fn empty_model_is_optimal_at_zero() {
        let m = LpModel::new();
        assert_eq!(lp_solve(&m).unwrap().objective(), Some(0.0));
    }
}
