use std::fmt::Write as _;

use crate::OptimError;

pub type VarId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Sense {
    Le,
    Eq,
    Ge,
}

impl Sense {
    fn symbol(self) -> &'static str {
        match self {
            Sense::Le => "<=",
            Sense::Eq => "=",
            Sense::Ge => ">=",
        }
    }

    pub(crate) fn holds(self, lhs: i64, rhs: i64) -> bool {
        match self {
            Sense::Le => lhs <= rhs,
            Sense::Eq => lhs == rhs,
            Sense::Ge => lhs >= rhs,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntVar {
    pub name: String,
    pub lower: i64,
    pub upper: i64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub name: String,
    pub terms: Vec<(VarId, i64)>,
    pub sense: Sense,
    pub rhs: i64,
}

impl Constraint {
    pub fn activity(&self, x: &[i64]) -> i64 {
        self.terms.iter().map(|&(j, a)| a * x[j]).sum()
    }
}

/// Maximization model over bounded integer variables.
///
/// When `feasibility_only` is set the objective is ignored and the solver
/// stops at the first integer point it finds.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct IntModel {
    pub vars: Vec<IntVar>,
    pub constraints: Vec<Constraint>,
    pub objective: Vec<f64>,
    pub feasibility_only: bool,
}

impl IntModel {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn feasibility() -> Self {
        Self {
            feasibility_only: true,
            ..Self::default()
        }
    }

    pub fn num_vars(&self) -> usize {
        self.vars.len()
    }

    pub fn add_var(&mut self, name: impl Into<String>, lower: i64, upper: i64, obj: f64) -> VarId {
        self.vars.push(IntVar {
            name: name.into(),
            lower,
            upper,
        });
        self.objective.push(obj);
        self.vars.len() - 1
    }

    pub fn add_constraint(
        &mut self,
        name: impl Into<String>,
        terms: Vec<(VarId, i64)>,
        sense: Sense,
        rhs: i64,
    ) {
        self.constraints.push(Constraint {
            name: name.into(),
            terms,
            sense,
            rhs,
        });
    }

    pub fn set_objective(&mut self, var: VarId, coeff: f64) {
        self.objective[var] = coeff;
    }

    pub fn evaluate(&self, x: &[i64]) -> f64 {
        self.objective
            .iter()
            .zip(x)
            .map(|(&c, &v)| c * v as f64)
            .sum()
    }

    /// Exact integer check of bounds and constraints.
    pub fn is_feasible(&self, x: &[i64]) -> bool {
        if x.len() != self.vars.len() {
            return false;
        }
        let in_bounds = self
            .vars
            .iter()
            .zip(x)
            .all(|(v, &value)| v.lower <= value && value <= v.upper);
        in_bounds
            && self
                .constraints
                .iter()
                .all(|c| c.sense.holds(c.activity(x), c.rhs))
    }

    pub(crate) fn validate(&self) -> Result<(), OptimError> {
        if self.objective.len() != self.vars.len() {
            return Err(OptimError::Malformed(format!(
                "{} objective coefficients for {} variables",
                self.objective.len(),
                self.vars.len()
            )));
        }
        if let Some(c) = self.objective.iter().find(|c| !c.is_finite()) {
            return Err(OptimError::Malformed(format!("objective coefficient {c}")));
        }
        for con in &self.constraints {
            if let Some(&(j, _)) = con.terms.iter().find(|&&(j, _)| j >= self.vars.len()) {
                return Err(OptimError::Malformed(format!(
                    "constraint {} references variable {j}",
                    con.name
                )));
            }
        }
        Ok(())
    }

    /// Renders the model in a CPLEX-like LP text format.
    pub fn to_lp_string(&self) -> String {
        let name = |j: VarId| {
            let n = &self.vars[j].name;
            if n.is_empty() {
                format!("x{j}")
            } else {
                n.clone()
            }
        };
        let mut out = String::new();
        if self.feasibility_only {
            out.push_str("Maximize\n obj: 0\n");
        } else {
            out.push_str("Maximize\n obj:");
            let mut any = false;
            for (j, &c) in self.objective.iter().enumerate() {
                if c != 0.0 {
                    let _ = write!(out, " {} {} {}", if c < 0.0 { "-" } else { "+" }, c.abs(), name(j));
                    any = true;
                }
            }
            if !any {
                out.push_str(" 0");
            }
            out.push('\n');
        }
        out.push_str("Subject To\n");
        for (i, con) in self.constraints.iter().enumerate() {
            let label = if con.name.is_empty() {
                format!("c{i}")
            } else {
                con.name.clone()
            };
            let _ = write!(out, " {label}:");
            if con.terms.is_empty() {
                out.push_str(" 0");
            }
            for &(j, a) in &con.terms {
                let _ = write!(out, " {} {} {}", if a < 0 { "-" } else { "+" }, a.abs(), name(j));
            }
            let _ = writeln!(out, " {} {}", con.sense.symbol(), con.rhs);
        }
        out.push_str("Bounds\n");
        for (j, v) in self.vars.iter().enumerate() {
            let _ = writeln!(out, " {} <= {} <= {}", v.lower, name(j), v.upper);
        }
        out.push_str("General\n");
        for j in 0..self.vars.len() {
            let _ = writeln!(out, " {}", name(j));
        }
        out.push_str("End\n");
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn feasibility_check_is_exact() {
        let mut m = IntModel::new();
        let x = m.add_var("x", 0, 3, 1.0);
        let y = m.add_var("y", 0, 3, 2.0);
        m.add_constraint("cap", vec![(x, 1), (y, 1)], Sense::Le, 4);
        m.add_constraint("link", vec![(x, 1), (y, -1)], Sense::Eq, 0);
        assert!(m.is_feasible(&[2, 2]));
        assert!(!m.is_feasible(&[3, 3]));
        assert!(!m.is_feasible(&[1, 2]));
        assert_eq!(m.evaluate(&[2, 2]), 6.0);
    }

    #[test]
    fn lp_dump_lists_every_section() {
        let mut m = IntModel::new();
        let x = m.add_var("x", 0, 2, -1.5);
        m.add_constraint("", vec![(x, 3)], Sense::Ge, 1);
        let text = m.to_lp_string();
        assert!(text.contains("obj: - 1.5 x"));
        assert!(text.contains("c0: + 3 x >= 1"));
        assert!(text.contains("0 <= x <= 2"));
        assert!(text.ends_with("End\n"));
    }
}
