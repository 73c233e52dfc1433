//! Brute-force reference solvers used by tests and the self-test command.
//!
//! None of these share code with the production solvers.

use crate::model::{IntModel, Sense};

/// Exhaustive enumeration of the integer box. Returns the best objective
/// value, or `None` when no point is feasible.
pub fn enumerate_ilp(model: &IntModel) -> Option<f64> {
    let n = model.vars.len();
    if model.vars.iter().any(|v| v.lower > v.upper) {
        return None;
    }
    let mut x: Vec<i64> = model.vars.iter().map(|v| v.lower).collect();
    let mut best: Option<f64> = None;
    loop {
        let ok = model.constraints.iter().all(|c| {
            let act: i64 = c.terms.iter().map(|&(j, a)| a * x[j]).sum();
            match c.sense {
                Sense::Le => act <= c.rhs,
                Sense::Eq => act == c.rhs,
                Sense::Ge => act >= c.rhs,
            }
        });
        if ok {
            let value = if model.feasibility_only {
                0.0
            } else {
                (0..n).map(|j| model.objective[j] * x[j] as f64).sum()
            };
            best = Some(best.map_or(value, |b: f64| b.max(value)));
        }
        let mut k = 0;
        loop {
            if k == n {
                return best;
            }
            if x[k] < model.vars[k].upper {
                x[k] += 1;
                break;
            }
            x[k] = model.vars[k].lower;
            k += 1;
        }
    }
}

/// Solves `a x = b` by Gauss-Jordan elimination with partial pivoting.
pub fn gauss_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-11 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in 0..n {
            if r != col {
                let f = a[r][col] / a[col][col];
                if f != 0.0 {
                    for c in col..n {
                        a[r][c] -= f * a[col][c];
                    }
                    b[r] -= f * b[col];
                }
            }
        }
    }
    Some((0..n).map(|i| b[i] / a[i][i]).collect())
}

/// Inverse by Gauss-Jordan elimination.
pub fn gauss_inverse(a: &[Vec<f64>]) -> Option<Vec<Vec<f64>>> {
    let n = a.len();
    let mut cols = Vec::with_capacity(n);
    for k in 0..n {
        let mut e = vec![0.0; n];
        e[k] = 1.0;
        cols.push(gauss_solve(a.to_vec(), e)?);
    }
    Some((0..n).map(|i| (0..n).map(|j| cols[j][i]).collect()).collect())
}

/// Maximizes `c·x` over `{x >= 0, rows}` by enumerating every basic
/// solution. Intended for bounded polytopes with few hyperplanes.
pub fn vertex_enumeration(c: &[f64], rows: &[(Vec<f64>, Sense, f64)]) -> Option<f64> {
    let n = c.len();
    // Hyperplanes: each row at equality, then x_j = 0.
    let mut planes: Vec<(Vec<f64>, f64)> = rows.iter().map(|(a, _, b)| (a.clone(), *b)).collect();
    for j in 0..n {
        let mut a = vec![0.0; n];
        a[j] = 1.0;
        planes.push((a, 0.0));
    }
    let feasible = |x: &[f64]| {
        x.iter().all(|&v| v >= -1e-9)
            && rows.iter().all(|(a, s, b)| {
                let act: f64 = a.iter().zip(x).map(|(p, q)| p * q).sum();
                let tol = 1e-9 * (1.0 + b.abs());
                match s {
                    Sense::Le => act <= b + tol,
                    Sense::Ge => act >= b - tol,
                    Sense::Eq => (act - b).abs() <= tol,
                }
            })
    };
    let mut best: Option<f64> = None;
    let mut pick: Vec<usize> = (0..n).collect();
    let m = planes.len();
    if m < n {
        return None;
    }
    loop {
        let a: Vec<Vec<f64>> = pick.iter().map(|&i| planes[i].0.clone()).collect();
        let b: Vec<f64> = pick.iter().map(|&i| planes[i].1).collect();
        if let Some(x) = gauss_solve(a, b) {
            if feasible(&x) {
                let v: f64 = c.iter().zip(&x).map(|(p, q)| p * q).sum();
                best = Some(best.map_or(v, |bv: f64| bv.max(v)));
            }
        }
        // next combination
        let mut i = n;
        loop {
            if i == 0 {
                return best;
            }
            i -= 1;
            if pick[i] < m - n + i {
                pick[i] += 1;
                for k in i + 1..n {
                    pick[k] = pick[k - 1] + 1;
                }
                break;
            }
        }
        if n == 0 {
            return best;
        }
    }
}

/// Dual projected-gradient solve of `min ½θᵀHθ + gᵀθ` s.t. `Aθ >= b`.
/// Returns the primal point recovered from the final multipliers.
pub fn dual_projected_gradient(
    h: &[Vec<f64>],
    g: &[f64],
    a: &[Vec<f64>],
    b: &[f64],
    steps: usize,
) -> Option<Vec<f64>> {
    let n = g.len();
    let k = b.len();
    let hinv = gauss_inverse(h)?;
    let mat_vec = |m: &[Vec<f64>], v: &[f64]| -> Vec<f64> {
        m.iter().map(|row| row.iter().zip(v).map(|(p, q)| p * q).sum()).collect()
    };
    let primal = |mu: &[f64]| -> Vec<f64> {
        let mut rhs: Vec<f64> = g.iter().map(|v| -v).collect();
        for (i, &m) in mu.iter().enumerate() {
            for j in 0..n {
                rhs[j] += m * a[i][j];
            }
        }
        mat_vec(&hinv, &rhs)
    };
    // Lipschitz constant of the dual gradient: ‖A H⁻¹ Aᵀ‖ bounded by its
    // Frobenius norm.
    let mut lip = 0.0;
    for i in 0..k {
        let hai = mat_vec(&hinv, &a[i]);
        for row in a {
            let v: f64 = row.iter().zip(&hai).map(|(p, q)| p * q).sum();
            lip += v * v;
        }
    }
    let step = if lip > 0.0 { 1.0 / lip.sqrt() } else { 1.0 };
    let mut mu = vec![0.0; k];
    for _ in 0..steps {
        let theta = primal(&mu);
        for i in 0..k {
            let act: f64 = a[i].iter().zip(&theta).map(|(p, q)| p * q).sum();
            mu[i] = (mu[i] + step * (b[i] - act)).max(0.0);
        }
    }
    Some(primal(&mu))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vertex_enumeration_on_square() {
        let rows = vec![
            (vec![1.0, 0.0], Sense::Le, 2.0),
            (vec![0.0, 1.0], Sense::Le, 3.0),
        ];
        assert_eq!(vertex_enumeration(&[1.0, 1.0], &rows), Some(5.0));
    }

    #[test]
    fn enumeration_counts_box() {
        let mut m = IntModel::new();
        let x = m.add_var("x", -1, 2, 1.0);
        m.add_constraint("", vec![(x, 2)], Sense::Le, 3);
        assert_eq!(enumerate_ilp(&m), Some(1.0));
    }

    #[test]
    fn projected_gradient_box() {
        // min ½(θ-2)² s.t. θ <= 1  → θ = 1
        let theta = dual_projected_gradient(&[vec![1.0]], &[-2.0], &[vec![-1.0]], &[-1.0], 10_000).unwrap();
        assert!((theta[0] - 1.0).abs() < 1e-9);
    }
}
