//! Primal active-set method for ridge least squares under linear
//! inequality constraints `a_i · θ >= b_i`.

use nalgebra::{DMatrix, DVector};

use crate::OptimError;

#[derive(Debug, Clone, PartialEq)]
pub struct LinearInequality {
    pub coeffs: Vec<f64>,
    pub rhs: f64,
}

/// Minimize `‖ν − Xθ‖² + γ Σ_{j penalized} θ_j²` subject to the inequalities.
#[derive(Debug, Clone)]
pub struct RidgeProblem {
    pub design: DMatrix<f64>,
    pub targets: DVector<f64>,
    pub ridge: f64,
    pub penalized: Vec<bool>,
    pub constraints: Vec<LinearInequality>,
}

#[derive(Debug, Clone)]
pub struct RidgeSolution {
    pub weights: DVector<f64>,
    pub objective: f64,
    /// Multiplier per constraint, zero for inactive ones.
    pub multipliers: Vec<f64>,
    /// Largest KKT violation, with stationarity and complementarity scaled
    /// by `1 + ‖g‖∞` where `g` is the objective gradient at zero.
    pub kkt_residual: f64,
    pub iterations: usize,
}

impl RidgeProblem {
    pub fn unconstrained(design: DMatrix<f64>, targets: DVector<f64>, ridge: f64) -> Self {
        let p = design.ncols();
        Self {
            design,
            targets,
            ridge,
            penalized: vec![true; p],
            constraints: Vec::new(),
        }
    }

    pub fn objective(&self, theta: &DVector<f64>) -> f64 {
        let r = &self.targets - &self.design * theta;
        let pen: f64 = theta
            .iter()
            .zip(&self.penalized)
            .filter(|(_, &p)| p)
            .map(|(v, _)| v * v)
            .sum();
        r.dot(&r) + self.ridge * pen
    }

    /// Hessian `H` and linear term `g` of `½θᵀHθ + gᵀθ` (constant dropped).
    pub fn quadratic_form(&self) -> (DMatrix<f64>, DVector<f64>) {
        let xt = self.design.transpose();
        let mut h = &xt * &self.design * 2.0;
        for (j, &p) in self.penalized.iter().enumerate() {
            if p {
                h[(j, j)] += 2.0 * self.ridge;
            }
        }
        let g = -(&xt * &self.targets) * 2.0;
        (h, g)
    }
}

fn kkt_solve(
    h: &DMatrix<f64>,
    g: &DVector<f64>,
    rows: &[&LinearInequality],
) -> Option<(DVector<f64>, DVector<f64>)> {
    let n = h.nrows();
    let k = rows.len();
    let mut kkt = DMatrix::zeros(n + k, n + k);
    kkt.view_mut((0, 0), (n, n)).copy_from(h);
    let mut rhs = DVector::zeros(n + k);
    for j in 0..n {
        rhs[j] = -g[j];
    }
    for (i, c) in rows.iter().enumerate() {
        for j in 0..n {
            kkt[(j, n + i)] = -c.coeffs[j];
            kkt[(n + i, j)] = c.coeffs[j];
        }
        rhs[n + i] = c.rhs;
    }
    let lu = kkt.clone().lu();
    let mut sol = lu.solve(&rhs)?;
    for _ in 0..2 {
        let resid = &rhs - &kkt * &sol;
        sol += lu.solve(&resid)?;
    }
    if sol.iter().any(|v| !v.is_finite()) {
        return None;
    }
    let theta = sol.rows(0, n).into_owned();
    let lambda = sol.rows(n, k).into_owned();
    Some((theta, lambda))
}

fn kkt_residual(
    h: &DMatrix<f64>,
    g: &DVector<f64>,
    cons: &[LinearInequality],
    theta: &DVector<f64>,
    mult: &[f64],
) -> f64 {
    let scale = 1.0 + g.amax();
    let mut stat = h * theta + g;
    for (c, &m) in cons.iter().zip(mult) {
        if m != 0.0 {
            for j in 0..theta.len() {
                stat[j] -= m * c.coeffs[j];
            }
        }
    }
    let mut worst = stat.amax() / scale;
    for (c, &m) in cons.iter().zip(mult) {
        let slack: f64 = c.coeffs.iter().zip(theta.iter()).map(|(a, t)| a * t).sum::<f64>() - c.rhs;
        worst = worst.max(-slack).max(-m / scale).max((m * slack).abs() / scale);
    }
    worst
}

pub fn qp_ridge_constrained(p: &RidgeProblem) -> Result<RidgeSolution, OptimError> {
    let n = p.design.ncols();
    if p.targets.len() != p.design.nrows() || p.penalized.len() != n {
        return Err(OptimError::Malformed("ridge problem dimensions disagree".into()));
    }
    if p.ridge < 0.0 || !p.ridge.is_finite() {
        return Err(OptimError::Malformed(format!("ridge weight {}", p.ridge)));
    }
    for (i, c) in p.constraints.iter().enumerate() {
        if c.coeffs.len() != n {
            return Err(OptimError::Malformed(format!("constraint {i} has wrong length")));
        }
        if c.rhs > 0.0 {
            return Err(OptimError::InfeasibleStart { index: i, rhs: c.rhs });
        }
    }
    let (h, g) = p.quadratic_form();
    let hmax = h.diagonal().amax().max(f64::MIN_POSITIVE);
    match h.clone().cholesky() {
        Some(ch) if ch.l_dirty().diagonal().iter().all(|&d| d * d > 1e-12 * hmax) => {}
        _ => return Err(OptimError::NotStrictlyConvex),
    }

    let mut theta = DVector::zeros(n);
    let mut working: Vec<usize> = Vec::new();
    let max_iter = 50 * (n + p.constraints.len()) + 100;
    let mut iterations = 0;
    loop {
        iterations += 1;
        if iterations > max_iter {
            let mult = vec![0.0; p.constraints.len()];
            return Err(OptimError::NoConvergence {
                iterations,
                working_set: working.len(),
                residual: kkt_residual(&h, &g, &p.constraints, &theta, &mult),
            });
        }
        let rows: Vec<&LinearInequality> = working.iter().map(|&i| &p.constraints[i]).collect();
        let (target, lambda) = kkt_solve(&h, &g, &rows).ok_or_else(|| OptimError::NoConvergence {
            iterations,
            working_set: working.len(),
            residual: f64::NAN,
        })?;
        let step = &target - &theta;
        let scale = 1.0 + theta.amax().max(target.amax());
        if step.amax() <= 1e-12 * scale {
            theta = target;
            let pos = lambda
                .iter()
                .enumerate()
                .filter(|(_, &l)| l < -1e-12)
                .min_by(|a, b| a.1.total_cmp(b.1))
                .map(|(k, _)| k);
            match pos {
                None => {
                    let mut mult = vec![0.0; p.constraints.len()];
                    for (k, &i) in working.iter().enumerate() {
                        mult[i] = lambda[k].max(0.0);
                    }
                    let kkt = kkt_residual(&h, &g, &p.constraints, &theta, &mult);
                    return Ok(RidgeSolution {
                        objective: p.objective(&theta),
                        weights: theta,
                        multipliers: mult,
                        kkt_residual: kkt,
                        iterations,
                    });
                }
                Some(k) => {
                    working.remove(k);
                }
            }
            continue;
        }
        let mut alpha = 1.0;
        let mut blocking = None;
        for (i, c) in p.constraints.iter().enumerate() {
            if working.contains(&i) {
                continue;
            }
            let ap: f64 = c.coeffs.iter().zip(step.iter()).map(|(a, s)| a * s).sum();
            if ap < -1e-14 {
                let slack: f64 =
                    c.coeffs.iter().zip(theta.iter()).map(|(a, t)| a * t).sum::<f64>() - c.rhs;
                let limit = (slack.max(0.0)) / -ap;
                if limit < alpha {
                    alpha = limit;
                    blocking = Some(i);
                }
            }
        }
        theta += step * alpha;
        if let Some(i) = blocking {
            working.push(i);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unconstrained_zero_ridge_is_least_squares() {
        let x = DMatrix::from_row_slice(4, 2, &[1.0, 0.0, 1.0, 1.0, 1.0, 2.0, 1.0, 3.0]);
        let y = DVector::from_vec(vec![1.0, 3.0, 5.0, 7.0]);
        let sol = qp_ridge_constrained(&RidgeProblem::unconstrained(x, y, 0.0)).unwrap();
        assert!((sol.weights[0] - 1.0).abs() < 1e-10);
        assert!((sol.weights[1] - 2.0).abs() < 1e-10);
        assert!(sol.kkt_residual <= 1e-9);
    }

    #[test]
    fn binding_nonnegativity() {
        // Fit y = -x under θ >= 0 forces θ = 0.
        let x = DMatrix::from_row_slice(3, 1, &[1.0, 2.0, 3.0]);
        let y = DVector::from_vec(vec![-1.0, -2.0, -3.0]);
        let mut p = RidgeProblem::unconstrained(x, y, 0.0);
        p.constraints.push(LinearInequality {
            coeffs: vec![1.0],
            rhs: 0.0,
        });
        let sol = qp_ridge_constrained(&p).unwrap();
        assert!(sol.weights[0].abs() < 1e-12);
        assert!(sol.multipliers[0] > 0.0);
        assert!(sol.kkt_residual <= 1e-9);
    }

    #[test]
    fn rejects_infeasible_origin() {
        let x = DMatrix::from_row_slice(1, 1, &[1.0]);
        let y = DVector::from_vec(vec![1.0]);
        let mut p = RidgeProblem::unconstrained(x, y, 1.0);
        p.constraints.push(LinearInequality {
            coeffs: vec![1.0],
            rhs: 1.0,
        });
        assert!(matches!(
            qp_ridge_constrained(&p),
            Err(OptimError::InfeasibleStart { .. })
        ));
    }

    #[test]
    fn singular_hessian_is_rejected() {
        let x = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 2.0, 2.0]);
        let y = DVector::from_vec(vec![1.0, 2.0]);
        let p = RidgeProblem::unconstrained(x, y, 0.0);
        assert!(matches!(
            qp_ridge_constrained(&p),
            Err(OptimError::NotStrictlyConvex)
        ));
    }
}
