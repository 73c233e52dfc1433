use locker_optim::{lp_solve, LpModel, LpOutcome, OptimError, Sense};

use crate::domain::{LockerOccupancy, PendingOrders, PreDecisionState, ProblemConfig, Request};
use crate::stochastic::residual_pickup_distribution;

/// Expected requests to come, `ô[d][c][φ-1]`, by the day their parcel is
/// allocated (`φ = 1` is today's allocation epoch).
pub fn dlp_expected_demand(cfg: &ProblemConfig, t_now: usize, horizon: usize) -> Vec<Vec<Vec<f64>>> {
    let (nd, nc, ne) = (cfg.sizes(), cfg.customers(), cfg.max_lead);
    let mut out = vec![vec![vec![0.0; horizon]; nc]; nd];
    for phi in 1..=horizon {
        for a in 1..=phi {
            let e = phi - a + 1;
            if e > ne {
                continue;
            }
            let slots = if a == 1 { cfg.slots.saturating_sub(t_now) } else { cfg.slots } as f64;
            for c in 0..nc {
                for d in 0..nd {
                    out[d][c][phi - 1] += slots * cfg.arrival.customer[c] * cfg.arrival.size[c][d] * cfg.arrival.lead[c][e - 1];
                }
            }
        }
    }
    out
}

/// Occupancy probabilities `(p̄[c][h-1][φ-1], p̂[c][ϑ-1][φ-1])`: a parcel
/// now at dwell h, or one allocated on day ϑ, is still in the locker at some
/// point of day φ.
#[allow(clippy::type_complexity)]
pub fn dlp_occupancy_probs(
    cfg: &ProblemConfig,
    t_now: usize,
    horizon: usize,
) -> (Vec<Vec<Vec<f64>>>, Vec<Vec<Vec<f64>>>) {
    let (nc, nb) = (cfg.customers(), cfg.max_storage);
    let mut locker = vec![vec![vec![0.0; horizon]; nb.saturating_sub(1)]; nc];
    let mut allocated = vec![vec![vec![0.0; horizon]; horizon]; nc];
    for c in 0..nc {
        for h in 1..nb {
            let law = residual_pickup_distribution(cfg, c, h, t_now).unwrap_or_else(|_| {
                let mut v = vec![0.0; nb];
                v[h - 1] = 1.0;
                v
            });
            for phi in 1..=horizon {
                locker[c][h - 1][phi - 1] = law.iter().enumerate().filter(|(i, _)| i + 1 >= h + phi - 1).map(|(_, p)| p).sum();
            }
        }
        for theta in 1..=horizon {
            for phi in theta..=horizon {
                allocated[c][theta - 1][phi - 1] = if phi == theta {
                    1.0
                } else {
                    cfg.pickup.day[c].iter().enumerate().filter(|(i, _)| i + 1 >= phi - theta).map(|(_, p)| p).sum()
                };
            }
        }
    }
    (locker, allocated)
}

/// Certainty-equivalent LP over `horizon` days for the given orders.
pub fn dlp_model(cfg: &ProblemConfig, t_now: usize, horizon: usize, l: &LockerOccupancy, o: &PendingOrders) -> LpModel {
    let (nd, nc, nf) = (cfg.sizes(), cfg.customers(), cfg.horizon());
    let demand = dlp_expected_demand(cfg, t_now, horizon);
    let (p_locker, p_alloc) = dlp_occupancy_probs(cfg, t_now, horizon);
    let mut lp = LpModel::new();
    let y: Vec<Vec<Vec<usize>>> = (0..nd)
        .map(|delta| {
            (0..nc)
                .map(|c| {
                    (1..=horizon)
                        .map(|phi| lp.add_var(format!("y_{}_{}_{phi}", delta + 1, c + 1), cfg.priority[c]))
                        .collect()
                })
                .collect()
        })
        .collect();
    for delta in 0..nd {
        for phi in 1..=horizon {
            let mut terms = Vec::new();
            for c in 0..nc {
                for j in 1..=phi {
                    let p = p_alloc[c][j - 1][phi - 1];
                    if p > 0.0 {
                        terms.push((y[delta][c][j - 1], p));
                    }
                }
            }
            let held: f64 = (0..nc)
                .flat_map(|c| (1..cfg.max_storage).map(move |h| (c, h)))
                .map(|(c, h)| p_locker[c][h - 1][phi - 1] * l.get(delta, c, h) as f64)
                .sum();
            lp.add_row(terms, Sense::Le, cfg.compartments[delta] as f64 - held);
        }
    }
    for c in 0..nc {
        for phi in 1..=horizon {
            let mut supply = 0.0;
            for delta in 0..nd {
                supply += demand[delta][c][phi - 1];
                if phi <= nf {
                    supply += o.get(delta, c, phi) as f64;
                }
                let terms = (0..=delta).map(|j| (y[j][c][phi - 1], 1.0)).collect();
                lp.add_row(terms, Sense::Le, supply);
            }
            if phi <= nf {
                let due: u32 = (0..nd).map(|d| o.get(d, c, phi)).sum();
                let terms = (0..nd).map(|j| (y[j][c][phi - 1], 1.0)).collect();
                lp.add_row(terms, Sense::Ge, due as f64);
            }
        }
    }
    lp
}

/// Optimal DLP value including the constant for already pending orders.
pub fn dlp_value(
    cfg: &ProblemConfig,
    t_now: usize,
    horizon: usize,
    l: &LockerOccupancy,
    o: &PendingOrders,
) -> Result<Option<f64>, OptimError> {
    let constant: f64 = o.cells().map(|(_, c, _, n)| cfg.priority[c] * n as f64).sum();
    match lp_solve(&dlp_model(cfg, t_now, horizon, l, o))? {
        LpOutcome::Optimal { objective, .. } => Ok(Some(objective - constant)),
        LpOutcome::Infeasible => Ok(None),
        LpOutcome::Unbounded => Err(OptimError::Numerical("DLP unbounded".into())),
    }
}

/// Accepts when the reward covers the DLP's displacement estimate.
/// An infeasible accept instance rejects; an infeasible reject instance
/// (with a feasible accept instance) accepts.
pub fn dlp_decide_request(
    cfg: &ProblemConfig,
    s: &PreDecisionState,
    r: &Request,
    horizon: usize,
) -> Result<bool, OptimError> {
    let accepted = s.pending.with_request(r);
    let Some(z_accept) = dlp_value(cfg, s.slot, horizon, &s.occupancy, &accepted)? else {
        return Ok(false);
    };
    let Some(z_reject) = dlp_value(cfg, s.slot, horizon, &s.occupancy, &s.pending)? else {
        return Ok(true);
    };
    Ok(cfg.priority[r.customer] >= z_reject - z_accept - 1e-9)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{Layout, RequestType, Setting};

    fn cfg() -> ProblemConfig {
        Layout::main().config(Setting::parse("1id").unwrap())
    }

    #[test]
    fn no_arrivals_means_no_demand() {
        let mut c = cfg();
        c.arrival.customer = vec![0.0; c.customers()];
        let o = dlp_expected_demand(&c, 3, 5);
        assert!(o.iter().flatten().flatten().all(|&v| v == 0.0));
    }

    #[test]
    fn end_of_day_demand_for_tonight_is_zero() {
        let c = cfg();
        let o = dlp_expected_demand(&c, c.slots, 5);
        assert!(o.iter().all(|per_c| per_c.iter().all(|v| v[0] == 0.0)));
        assert!(o.iter().any(|per_c| per_c.iter().any(|v| v[1] > 0.0)));
    }

    #[test]
    fn allocated_parcel_tail_probabilities() {
        let c = cfg();
        let (_, p_hat) = dlp_occupancy_probs(&c, 1, 5);
        assert_eq!(p_hat[0][1][1], 1.0);
        assert!((p_hat[0][0][2] - 0.4).abs() < 1e-12);
        assert_eq!(p_hat[0][0][4], 0.0);
    }

    #[test]
    fn ample_capacity_accepts() {
        let mut c = cfg();
        c.compartments = vec![1000, 1000, 1000];
        let r = Request {
            customer: 0,
            size: 2,
            lead: 1,
        };
        let s = PreDecisionState {
            day: 1,
            slot: 3,
            occupancy: LockerOccupancy::empty(&c),
            pending: PendingOrders::empty(&c),
            request: RequestType::Request(r),
        };
        assert!(dlp_decide_request(&c, &s, &r, 5).unwrap());
    }

    #[test]
    fn no_compartments_rejects() {
        let mut c = cfg();
        c.compartments = vec![0, 0, 0];
        let r = Request {
            customer: 1,
            size: 0,
            lead: 2,
        };
        let s = PreDecisionState {
            day: 1,
            slot: 3,
            occupancy: LockerOccupancy::empty(&c),
            pending: PendingOrders::empty(&c),
            request: RequestType::Request(r),
        };
        assert!(!dlp_decide_request(&c, &s, &r, 5).unwrap());
    }
}
