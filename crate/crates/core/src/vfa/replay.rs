use std::collections::VecDeque;

use locker_optim::{qp_ridge_constrained, LinearInequality, OptimError, RidgeProblem};
use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample;
use rand::Rng;

use super::features::{value_estimate, FeatureVector};

/// Standard deviations below this are treated as constant columns.
pub const MIN_FEATURE_SPREAD: f64 = 1e-12;

/// The accept branch of a stored epoch.
#[derive(Debug, Clone, PartialEq)]
pub enum AcceptBranch {
    /// No acceptance possible; the branch never wins the target maximum.
    Unavailable,
    Feasible { features: FeatureVector, reward: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Experience {
    pub previous: FeatureVector,
    pub reject: FeatureVector,
    pub accept: AcceptBranch,
}

/// Ring buffer keeping the most recent experiences.
#[derive(Debug, Clone)]
pub struct ReplayMemory {
    capacity: usize,
    items: VecDeque<Experience>,
}

impl ReplayMemory {
    pub fn new(capacity: usize) -> Self {
        Self {
            capacity,
            items: VecDeque::with_capacity(capacity.min(1 << 16)),
        }
    }

    pub fn push(&mut self, e: Experience) {
        if self.capacity == 0 {
            return;
        }
        if self.items.len() == self.capacity {
            self.items.pop_front();
        }
        self.items.push_back(e);
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn get(&self, i: usize) -> &Experience {
        &self.items[i]
    }

    pub fn iter(&self) -> impl Iterator<Item = &Experience> {
        self.items.iter()
    }

    /// Indices of a uniform sample without replacement, ascending.
    pub fn sample_indices(&self, size: usize, rng: &mut impl Rng) -> Vec<usize> {
        let n = size.min(self.items.len());
        let mut idx = sample(rng, self.items.len(), n).into_vec();
        idx.sort_unstable();
        idx
    }
}

/// `max(R_acc - R̄ + θ·φ_acc, -R̄ + θ·φ_rej)`.
pub fn er_target(e: &Experience, theta: &[f64], reward_rate: f64) -> f64 {
    let reject = -reward_rate + value_estimate(&e.reject, theta);
    match &e.accept {
        AcceptBranch::Unavailable => reject,
        AcceptBranch::Feasible { features, reward } => reject.max(reward - reward_rate + value_estimate(features, theta)),
    }
}

pub fn er_targets<'a>(batch: impl IntoIterator<Item = &'a Experience>, theta: &[f64], reward_rate: f64) -> Vec<f64> {
    batch.into_iter().map(|e| er_target(e, theta, reward_rate)).collect()
}

/// Monotonicity of window weights in size and length plus nonnegativity,
/// as `(a, b)` pairs meaning `θ_a ≥ θ_b` (`b = None` for `θ_a ≥ 0`).
/// Adjacent pairs imply all the others.
pub fn structure_pairs(sizes: usize, horizon: usize) -> Vec<(usize, Option<usize>)> {
    let idx = |d: usize, l: usize| 1 + d * horizon + l;
    let mut out = vec![(idx(0, 0), None)];
    for d in 0..sizes {
        for l in 0..horizon {
            if d > 0 {
                out.push((idx(d, l), Some(idx(d - 1, l))));
            }
            if l > 0 {
                out.push((idx(d, l), Some(idx(d, l - 1))));
            }
        }
    }
    out
}

/// Whether `theta` is doubly monotone and nonnegative within `tol`.
pub fn satisfies_structure(theta: &[f64], sizes: usize, horizon: usize, tol: f64) -> bool {
    (0..sizes).all(|d| {
        (0..horizon).all(|l| {
            let v = theta[1 + d * horizon + l];
            v >= -tol
                && (d == 0 || v - theta[1 + (d - 1) * horizon + l] >= -tol)
                && (l == 0 || v - theta[1 + d * horizon + l - 1] >= -tol)
        })
    })
}

/// Ridge fit of `targets` on the previous-state features, with standardized
/// columns and an unpenalized intercept. With `structure = Some((D, H))` the
/// back-transformed window weights are kept doubly monotone and nonnegative.
pub fn ridge_fit(
    previous: &[&FeatureVector],
    targets: &[f64],
    ridge: f64,
    structure: Option<(usize, usize)>,
) -> Result<Vec<f64>, OptimError> {
    let n = previous.len();
    let p = previous.first().map_or(0, |f| f.len());
    if n == 0 || p == 0 {
        return Err(OptimError::Malformed("empty regression batch".into()));
    }
    let mut mean = vec![0.0; p];
    let mut scale = vec![1.0; p];
    for j in 1..p {
        let m = previous.iter().map(|f| f.0[j]).sum::<f64>() / n as f64;
        let var = previous.iter().map(|f| (f.0[j] - m).powi(2)).sum::<f64>() / n as f64;
        mean[j] = m;
        if var.sqrt() >= MIN_FEATURE_SPREAD {
            scale[j] = var.sqrt();
        }
    }
    let design = DMatrix::from_fn(n, p, |i, j| {
        if j == 0 {
            1.0
        } else {
            (previous[i].0[j] - mean[j]) / scale[j]
        }
    });
    let mut penalized = vec![true; p];
    penalized[0] = false;
    let constraints = structure
        .map(|(sizes, horizon)| {
            structure_pairs(sizes, horizon)
                .into_iter()
                .map(|(a, b)| {
                    let mut coeffs = vec![0.0; p];
                    coeffs[a] = 1.0 / scale[a];
                    if let Some(b) = b {
                        coeffs[b] -= 1.0 / scale[b];
                    }
                    LinearInequality { coeffs, rhs: 0.0 }
                })
                .collect()
        })
        .unwrap_or_default();
    let problem = RidgeProblem {
        design,
        targets: DVector::from_column_slice(targets),
        ridge,
        penalized,
        constraints,
    };
    let sol = qp_ridge_constrained(&problem)?;
    let mut theta = vec![0.0; p];
    theta[0] = sol.weights[0];
    for j in 1..p {
        theta[j] = sol.weights[j] / scale[j];
        theta[0] -= sol.weights[j] * mean[j] / scale[j];
    }
    Ok(theta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn fv(v: &[f64]) -> FeatureVector {
        FeatureVector(v.to_vec())
    }

    #[test]
    fn memory_keeps_most_recent() {
        let mut m = ReplayMemory::new(3);
        for i in 0..5 {
            m.push(Experience {
                previous: fv(&[1.0, i as f64]),
                reject: fv(&[1.0, 0.0]),
                accept: AcceptBranch::Unavailable,
            });
        }
        let kept: Vec<f64> = m.iter().map(|e| e.previous.0[1]).collect();
        assert_eq!(kept, vec![2.0, 3.0, 4.0]);
    }

    #[test]
    fn unavailable_accept_uses_reject_branch() {
        let e = Experience {
            previous: fv(&[1.0, 1.0]),
            reject: fv(&[1.0, 2.0]),
            accept: AcceptBranch::Unavailable,
        };
        assert_eq!(er_target(&e, &[0.5, 1.0], 0.25), -0.25 + 2.5);
        let feasible = Experience {
            accept: AcceptBranch::Feasible {
                features: fv(&[1.0, 0.0]),
                reward: 1.0,
            },
            ..e
        };
        assert_eq!(er_target(&feasible, &[0.0, 0.0], 0.0), 1.0);
    }

    #[test]
    fn sample_has_no_duplicates() {
        let mut m = ReplayMemory::new(10);
        for _ in 0..10 {
            m.push(Experience {
                previous: fv(&[1.0]),
                reject: fv(&[1.0]),
                accept: AcceptBranch::Unavailable,
            });
        }
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let idx = m.sample_indices(6, &mut rng);
        assert_eq!(idx.len(), 6);
        assert!(idx.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(m.sample_indices(50, &mut rng).len(), 10);
    }

    #[test]
    fn ols_recovers_linear_targets() {
        let rows: Vec<FeatureVector> = (0..8)
            .map(|i| fv(&[1.0, i as f64, ((i * 3) % 5) as f64]))
            .collect();
        let targets: Vec<f64> = rows.iter().map(|r| 2.0 - 0.5 * r.0[1] + 1.5 * r.0[2]).collect();
        let refs: Vec<&FeatureVector> = rows.iter().collect();
        let theta = ridge_fit(&refs, &targets, 0.0, None).unwrap();
        for (a, b) in theta.iter().zip([2.0, -0.5, 1.5]) {
            assert!((a - b).abs() < 1e-9, "{theta:?}");
        }
    }

    #[test]
    fn constant_column_is_centered_only() {
        let rows: Vec<FeatureVector> = (0..5).map(|i| fv(&[1.0, 3.0, i as f64])).collect();
        let targets: Vec<f64> = rows.iter().map(|r| 1.0 + r.0[2]).collect();
        let refs: Vec<&FeatureVector> = rows.iter().collect();
        let theta = ridge_fit(&refs, &targets, 1e-9, None).unwrap();
        assert!(theta[1].abs() < 1e-6);
        assert!((theta[2] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn structured_fit_is_monotone() {
        let (d, h) = (2, 3);
        let rows: Vec<FeatureVector> = (0..30)
            .map(|i| {
                let mut v = vec![1.0];
                v.extend((0..d * h).map(|k| ((i * 7 + k * 3) % 11) as f64 / 3.0));
                FeatureVector(v)
            })
            .collect();
        // Targets favour decreasing weights so the constraints bind.
        let targets: Vec<f64> = rows.iter().map(|r| 5.0 * r.0[1] - 2.0 * r.0[6] + r.0[3]).collect();
        let refs: Vec<&FeatureVector> = rows.iter().collect();
        let free = ridge_fit(&refs, &targets, 1.0, None).unwrap();
        assert!(!satisfies_structure(&free, d, h, 1e-9));
        let theta = ridge_fit(&refs, &targets, 1.0, Some((d, h))).unwrap();
        assert!(satisfies_structure(&theta, d, h, 1e-9), "{theta:?}");
    }
}
