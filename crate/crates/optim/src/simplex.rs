//! Dense bounded-variable primal simplex.
//!
//! Variables are shifted to a zero lower bound; nonbasic variables sit at
//! either bound. Pricing is Dantzig's rule until a streak of degenerate
//! pivots, after which Bland's rule is used until the objective moves again.

use crate::model::Sense;
use crate::OptimError;

const PIVOT_TOL: f64 = 1e-9;
const COST_TOL: f64 = 1e-9;
const RATIO_TIE: f64 = 1e-12;
const DEGENERATE_STREAK: usize = 25;

#[derive(Debug, Clone)]
pub(crate) struct Row {
    pub terms: Vec<(usize, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

pub(crate) struct BoundedLp<'a> {
    pub objective: &'a [f64],
    pub lower: &'a [f64],
    pub upper: &'a [f64],
    pub rows: &'a [Row],
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum SimplexResult {
    Optimal { x: Vec<f64>, objective: f64 },
    Infeasible,
    Unbounded,
}

enum Phase {
    Optimal,
    Unbounded,
}

struct Tableau {
    m: usize,
    ncols: usize,
    a: Vec<f64>,
    beta: Vec<f64>,
    basis: Vec<usize>,
    is_basic: Vec<bool>,
    at_upper: Vec<bool>,
    ub: Vec<f64>,
    d: Vec<f64>,
    iterations: usize,
    max_iterations: usize,
}

impl Tableau {
    fn col(&self, i: usize, j: usize) -> f64 {
        self.a[i * self.ncols + j]
    }

    fn reduced_costs(&mut self, cost: &[f64]) {
        self.d.clear();
        self.d.extend_from_slice(cost);
        for i in 0..self.m {
            let cb = cost[self.basis[i]];
            if cb != 0.0 {
                let row = &self.a[i * self.ncols..(i + 1) * self.ncols];
                for (dj, &aij) in self.d.iter_mut().zip(row) {
                    *dj -= cb * aij;
                }
            }
        }
        for j in 0..self.ncols {
            if self.is_basic[j] {
                self.d[j] = 0.0;
            }
        }
    }

    fn pivot(&mut self, r: usize, e: usize) {
        let n = self.ncols;
        let piv = self.a[r * n + e];
        {
            let row = &mut self.a[r * n..(r + 1) * n];
            for v in row.iter_mut() {
                *v /= piv;
            }
            row[e] = 1.0;
        }
        let pivot_row: Vec<f64> = self.a[r * n..(r + 1) * n].to_vec();
        for i in 0..self.m {
            if i == r {
                continue;
            }
            let f = self.a[i * n + e];
            if f != 0.0 {
                let row = &mut self.a[i * n..(i + 1) * n];
                for (v, &p) in row.iter_mut().zip(&pivot_row) {
                    *v -= f * p;
                }
                row[e] = 0.0;
            }
        }
        let f = self.d[e];
        if f != 0.0 {
            for (dj, &p) in self.d.iter_mut().zip(&pivot_row) {
                *dj -= f * p;
            }
            self.d[e] = 0.0;
        }
        let leaving = self.basis[r];
        self.is_basic[leaving] = false;
        self.is_basic[e] = true;
        self.basis[r] = e;
    }

    fn run(&mut self, cost: &[f64]) -> Result<Phase, OptimError> {
        self.reduced_costs(cost);
        let mut degenerate = 0usize;
        loop {
            self.iterations += 1;
            if self.iterations > self.max_iterations {
                return Err(OptimError::Numerical(format!(
                    "iteration limit {} reached",
                    self.max_iterations
                )));
            }
            let bland = degenerate >= DEGENERATE_STREAK;
            let mut enter = None;
            let mut best = 0.0;
            for j in 0..self.ncols {
                if self.is_basic[j] || self.ub[j] == 0.0 {
                    continue;
                }
                let dj = self.d[j];
                let eligible = if self.at_upper[j] { dj < -COST_TOL } else { dj > COST_TOL };
                if eligible {
                    if bland {
                        enter = Some(j);
                        break;
                    }
                    if dj.abs() > best {
                        best = dj.abs();
                        enter = Some(j);
                    }
                }
            }
            let Some(e) = enter else {
                return Ok(Phase::Optimal);
            };
            let dir = if self.at_upper[e] { -1.0 } else { 1.0 };

            let mut theta = self.ub[e];
            let mut leave: Option<(usize, bool)> = None;
            let mut leave_alpha = 0.0;
            for i in 0..self.m {
                let alpha = self.col(i, e);
                if alpha.abs() <= PIVOT_TOL {
                    continue;
                }
                let rate = -dir * alpha;
                let b = self.basis[i];
                let (limit, to_upper) = if rate < 0.0 {
                    (self.beta[i] / -rate, false)
                } else {
                    if self.ub[b].is_infinite() {
                        continue;
                    }
                    ((self.ub[b] - self.beta[i]) / rate, true)
                };
                let limit = limit.max(0.0);
                let better = match leave {
                    _ if limit < theta - RATIO_TIE => true,
                    Some((r, _)) if (limit - theta).abs() <= RATIO_TIE => {
                        if bland {
                            b < self.basis[r]
                        } else {
                            alpha.abs() > leave_alpha
                        }
                    }
                    _ => false,
                };
                if better {
                    theta = limit;
                    leave = Some((i, to_upper));
                    leave_alpha = alpha.abs();
                }
            }
            if theta.is_infinite() {
                return Ok(Phase::Unbounded);
            }

            for i in 0..self.m {
                let alpha = self.col(i, e);
                if alpha != 0.0 {
                    self.beta[i] -= alpha * dir * theta;
                }
            }
            match leave {
                None => {
                    self.at_upper[e] = !self.at_upper[e];
                }
                Some((r, to_upper)) => {
                    let start = if self.at_upper[e] { self.ub[e] } else { 0.0 };
                    let leaving = self.basis[r];
                    self.pivot(r, e);
                    self.beta[r] = start + dir * theta;
                    self.at_upper[e] = false;
                    self.at_upper[leaving] = to_upper;
                }
            }
            if theta <= RATIO_TIE {
                degenerate += 1;
            } else {
                degenerate = 0;
            }
        }
    }

    fn value(&self, j: usize) -> f64 {
        if self.is_basic[j] {
            0.0
        } else if self.at_upper[j] {
            self.ub[j]
        } else {
            0.0
        }
    }
}

pub(crate) fn solve(lp: &BoundedLp) -> Result<SimplexResult, OptimError> {
    let n = lp.objective.len();
    if lp.lower.iter().zip(lp.upper).any(|(l, u)| l > u) {
        return Ok(SimplexResult::Infeasible);
    }
    let m = lp.rows.len();
    let slack_count = lp.rows.iter().filter(|r| r.sense != Sense::Eq).count();

    let mut rhs = Vec::with_capacity(m);
    let mut sign = Vec::with_capacity(m);
    let mut needs_artificial = Vec::with_capacity(m);
    for row in lp.rows {
        let b = row.rhs - row.terms.iter().map(|&(j, a)| a * lp.lower[j]).sum::<f64>();
        let s = if b < 0.0 { -1.0 } else { 1.0 };
        let slack_coeff = match row.sense {
            Sense::Le => s,
            Sense::Ge => -s,
            Sense::Eq => 0.0,
        };
        rhs.push(b * s);
        sign.push(s);
        needs_artificial.push(slack_coeff != 1.0);
    }
    let art_count = needs_artificial.iter().filter(|&&x| x).count();
    let ncols = n + slack_count + art_count;

    let mut t = Tableau {
        m,
        ncols,
        a: vec![0.0; m * ncols],
        beta: rhs.clone(),
        basis: vec![0; m],
        is_basic: vec![false; ncols],
        at_upper: vec![false; ncols],
        ub: vec![f64::INFINITY; ncols],
        d: Vec::with_capacity(ncols),
        iterations: 0,
        max_iterations: 1000 + 50 * (m + ncols),
    };
    for j in 0..n {
        t.ub[j] = lp.upper[j] - lp.lower[j];
    }
    let mut slack = n;
    let mut art = n + slack_count;
    for (i, row) in lp.rows.iter().enumerate() {
        for &(j, a) in &row.terms {
            t.a[i * ncols + j] += a * sign[i];
        }
        if row.sense != Sense::Eq {
            let coeff = if row.sense == Sense::Le { sign[i] } else { -sign[i] };
            t.a[i * ncols + slack] = coeff;
            if !needs_artificial[i] {
                t.basis[i] = slack;
                t.is_basic[slack] = true;
            }
            slack += 1;
        }
        if needs_artificial[i] {
            t.a[i * ncols + art] = 1.0;
            t.basis[i] = art;
            t.is_basic[art] = true;
            art += 1;
        }
    }

    let art_start = n + slack_count;
    if art_count > 0 {
        let mut cost = vec![0.0; ncols];
        for c in cost.iter_mut().skip(art_start) {
            *c = -1.0;
        }
        if let Phase::Unbounded = t.run(&cost)? {
            return Err(OptimError::Numerical("phase one reported unbounded".into()));
        }
        let scale = 1.0 + rhs.iter().fold(0.0f64, |acc, &b| acc.max(b.abs()));
        let infeasibility: f64 = (0..m)
            .filter(|&i| t.basis[i] >= art_start)
            .map(|i| t.beta[i])
            .sum();
        if infeasibility > 1e-7 * scale {
            return Ok(SimplexResult::Infeasible);
        }
        for j in art_start..ncols {
            t.ub[j] = 0.0;
            t.at_upper[j] = false;
        }
        for i in 0..m {
            if t.basis[i] >= art_start {
                t.beta[i] = 0.0;
            }
        }
    }

    let mut cost = vec![0.0; ncols];
    cost[..n].copy_from_slice(lp.objective);
    if let Phase::Unbounded = t.run(&cost)? {
        return Ok(SimplexResult::Unbounded);
    }

    let mut shifted: Vec<f64> = (0..ncols).map(|j| t.value(j)).collect();
    for i in 0..m {
        shifted[t.basis[i]] = t.beta[i];
    }
    let x: Vec<f64> = (0..n)
        .map(|j| {
            let v = lp.lower[j] + shifted[j];
            v.clamp(lp.lower[j], lp.upper[j])
        })
        .collect();

    for (i, row) in lp.rows.iter().enumerate() {
        let act: f64 = row.terms.iter().map(|&(j, a)| a * x[j]).sum();
        let mag: f64 = row.terms.iter().map(|&(j, a)| (a * x[j]).abs()).sum();
        let tol = 1e-6 * (1.0 + row.rhs.abs() + mag);
        let ok = match row.sense {
            Sense::Le => act <= row.rhs + tol,
            Sense::Ge => act >= row.rhs - tol,
            Sense::Eq => (act - row.rhs).abs() <= tol,
        };
        if !ok {
            return Err(OptimError::Numerical(format!(
                "row {i} violated after solve: activity {act}, rhs {}",
                row.rhs
            )));
        }
    }
    let objective = lp.objective.iter().zip(&x).map(|(c, v)| c * v).sum();
    Ok(SimplexResult::Optimal { x, objective })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(terms: &[(usize, f64)], sense: Sense, rhs: f64) -> Row {
        Row {
            terms: terms.to_vec(),
            sense,
            rhs,
        }
    }

    #[test]
    fn textbook_two_variable_lp() {
        // max 3x + 5y, x <= 4, 2y <= 12, 3x + 2y <= 18
        let rows = vec![
            row(&[(0, 1.0)], Sense::Le, 4.0),
            row(&[(1, 2.0)], Sense::Le, 12.0),
            row(&[(0, 3.0), (1, 2.0)], Sense::Le, 18.0),
        ];
        let lp = BoundedLp {
            objective: &[3.0, 5.0],
            lower: &[0.0, 0.0],
            upper: &[f64::INFINITY, f64::INFINITY],
            rows: &rows,
        };
        match solve(&lp).unwrap() {
            SimplexResult::Optimal { x, objective } => {
                assert!((objective - 36.0).abs() < 1e-9);
                assert!((x[0] - 2.0).abs() < 1e-9 && (x[1] - 6.0).abs() < 1e-9);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn bounds_and_equalities() {
        // max x - y, x + y = 3, 1 <= x <= 2, y >= -1
        let rows = vec![row(&[(0, 1.0), (1, 1.0)], Sense::Eq, 3.0)];
        let lp = BoundedLp {
            objective: &[1.0, -1.0],
            lower: &[1.0, -1.0],
            upper: &[2.0, 10.0],
            rows: &rows,
        };
        match solve(&lp).unwrap() {
            SimplexResult::Optimal { x, objective } => {
                assert!((objective - 1.0).abs() < 1e-9, "{x:?}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn detects_infeasible_and_unbounded() {
        let rows = vec![
            row(&[(0, 1.0)], Sense::Ge, 3.0),
            row(&[(0, 1.0)], Sense::Le, 2.0),
        ];
        let lp = BoundedLp {
            objective: &[1.0],
            lower: &[0.0],
            upper: &[f64::INFINITY],
            rows: &rows,
        };
        assert_eq!(solve(&lp).unwrap(), SimplexResult::Infeasible);
        let rows = vec![row(&[(0, 1.0), (1, -1.0)], Sense::Le, 2.0)];
        let lp = BoundedLp {
            objective: &[1.0, 0.0],
            lower: &[0.0, 0.0],
            upper: &[f64::INFINITY, f64::INFINITY],
            rows: &rows,
        };
        assert_eq!(solve(&lp).unwrap(), SimplexResult::Unbounded);
    }

    #[test]
    fn degenerate_redundant_equalities_terminate() {
        let rows = vec![
            row(&[(0, 1.0), (1, 1.0), (2, 1.0)], Sense::Eq, 1.0),
            row(&[(0, 2.0), (1, 2.0), (2, 2.0)], Sense::Eq, 2.0),
            row(&[(0, 1.0), (1, 1.0), (2, 1.0)], Sense::Eq, 1.0),
            row(&[(0, 1.0), (1, -1.0)], Sense::Le, 0.0),
            row(&[(1, 1.0), (2, -1.0)], Sense::Le, 0.0),
        ];
        let lp = BoundedLp {
            objective: &[1.0, 1.0, 1.0],
            lower: &[0.0; 3],
            upper: &[f64::INFINITY; 3],
            rows: &rows,
        };
        match solve(&lp).unwrap() {
            SimplexResult::Optimal { objective, .. } => assert!((objective - 1.0).abs() < 1e-9),
            other => panic!("{other:?}"),
        }
    }
}
