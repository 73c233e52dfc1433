use std::collections::BTreeMap;

use locker_optim::oracle::{dual_projected_gradient, enumerate_ilp, vertex_enumeration};
use locker_optim::{
    ilp_solve, lp_solve, qp_ridge_constrained, IlpOutcome, IntModel, LinearInequality, LpModel, LpOutcome, RidgeProblem,
    Sense,
};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::oracle::{best_window_packings, feasible_by_enumeration, tiny_config, window_config, WindowMultiset};
use super::{visit_states, SuiteReport};
use crate::allocation::{
    cfa_constraints, cfa_model_with, check_feasible, count_windows_oracle, is_allocatable, solve_two_stage,
    window_weights_with, CfaScheme, Fault, WindowWeights,
};
use crate::domain::{
    apply_allocation, apply_demand_control, apply_exogenous, worked_example, AllocationPlan, ExogenousInfo, Layout,
    LockerOccupancy, PendingOrders, PickupScenario, ProblemConfig, Request, RequestType, Setting,
};
use crate::policies::{dlp_expected_demand, dlp_occupancy_probs};
use crate::stochastic::{residual_pickup_distribution, rng_for, sample_pickup_day, sample_residual_tag};

/// Replays the three-epoch example through the transition functions and
/// checks the stated states, decisions and windows.
pub fn worked_example() -> SuiteReport {
    SuiteReport::run("worked example", |fail| {
        let cfg = worked_example::config();
        let mut check = |ok: bool, what: &str| {
            if !ok {
                fail.push(what.to_string());
            }
        };
        let s_k = worked_example::state_k();
        let i6 = *s_k.request.request().expect("request i=6");
        check(
            i6 == Request { customer: 0, size: 0, lead: 1 } && s_k.slot == 7,
            "S_k request is a small next-day parcel at slot 7",
        );
        let mut l_k = LockerOccupancy::empty(&cfg);
        l_k.set(0, 0, 1, 2);
        l_k.set(0, 0, 2, 1);
        l_k.set(1, 0, 1, 1);
        check(s_k.occupancy == l_k, "S_k locker");
        check(check_feasible(&cfg, &s_k.occupancy, &s_k.pending, Some(&i6)), "request i=6 is feasible");

        let post_k = apply_demand_control(&cfg, &s_k, true).expect("accept i=6");
        check(post_k == worked_example::post_state_k(), "S_k^x after accepting i=6");

        let mut gone = LockerOccupancy::empty(&cfg);
        gone.set(0, 0, 2, 1);
        gone.set(1, 0, 1, 1);
        let quiet = apply_exogenous(
            &post_k,
            &ExogenousInfo {
                day: post_k.day,
                slot: 8,
                request: RequestType::NoArrival,
                pickups: gone,
            },
        )
        .expect("pickups exist");
        let post = apply_demand_control(&cfg, &quiet, false).expect("no request");
        let s_k1 = apply_exogenous(
            &post,
            &ExogenousInfo {
                day: post.day,
                slot: 9,
                request: worked_example::state_k1().request,
                pickups: LockerOccupancy::empty(&cfg),
            },
        )
        .expect("no pickups");
        check(s_k1 == worked_example::state_k1(), "S_{k+1}");
        let post_k1 = apply_demand_control(&cfg, &s_k1, true).expect("accept i=7");
        let mut one_small = LockerOccupancy::empty(&cfg);
        one_small.set(0, 0, 1, 1);
        let s_k2 = apply_exogenous(
            &post_k1,
            &ExogenousInfo {
                day: post_k1.day,
                slot: cfg.slots + 1,
                request: RequestType::NoArrival,
                pickups: one_small,
            },
        )
        .expect("pickup exists");
        check(s_k2 == worked_example::state_k2(), "S_{k+2}");

        let mut into_large = AllocationPlan::empty(&cfg);
        into_large.set(0, 1, 0, 1);
        check(is_allocatable(&cfg, &s_k2.occupancy, &s_k2.pending, &into_large), "i=6 fits a large compartment");
        let post_k2 = apply_allocation(&cfg, &s_k2, &into_large).expect("valid allocation");
        let mut l = LockerOccupancy::empty(&cfg);
        l.set(0, 0, 2, 1);
        l.set(1, 0, 1, 1);
        let mut o = PendingOrders::empty(&cfg);
        o.set(0, 0, 2, 1);
        o.set(1, 0, 3, 1);
        check(
            post_k2.day == worked_example::DAY && post_k2.slot == 10 && post_k2.occupancy == l && post_k2.pending == o,
            "S_{k+2}^x",
        );

        // Windows of the tentative plan behind the feasibility proof:
        // small rows hold the three locker parcels, the large rows hold the
        // dwell-1 parcel then the order due in four days, and i=6.
        let expected: WindowMultiset = BTreeMap::from([((0, 5), 1), ((0, 4), 2), ((1, 1), 1), ((1, 3), 1)]);
        let f = cfg.horizon();
        let row = |busy: &[usize]| -> Vec<bool> { (1..=f).map(|e| busy.contains(&e)).collect() };
        let grid = vec![
            (0, row(&[1])),
            (0, row(&[1, 2])),
            (0, row(&[1, 2])),
            (1, row(&[1, 2, 4, 5, 6])),
            (1, row(&[1, 2, 3])),
        ];
        check(count_windows_oracle(&grid) == expected, "window counts of the drawn plan");
        let (mut model, vars) = cfa_constraints(&cfg, &post_k.occupancy, &post_k.pending, None);
        model.feasibility_only = true;
        for (delta, row) in vars.windows.total.iter().enumerate() {
            for (k, &id) in row.iter().enumerate() {
                let n = expected.get(&(delta, k + 1)).copied().unwrap_or(0);
                model.add_constraint("fix_w", vec![(id, 1)], Sense::Eq, n as i64);
            }
        }
        check(ilp_solve(&model).is_ok_and(|r| r.is_feasible()), "window counts are achievable");
        9
    })
}

/// Feasibility check against explicit compartment packing on reachable
/// states of a two-compartment locker, for every candidate request.
pub fn feasibility_oracle(states: usize, seed: u64) -> SuiteReport {
    SuiteReport::run("feasibility oracle", |fail| {
        let cfg = tiny_config();
        let days = 25;
        let instances = (states / (days as usize * cfg.slots)).max(1) as u64 + 1;
        let visited = visit_states(&cfg, seed, instances, days, 0.85);
        let mut requests: Vec<Option<Request>> = cfg.all_requests().into_iter().map(Some).collect();
        requests.push(None);
        let mut cases = 0;
        for s in visited.demand.iter().take(states) {
            for r in &requests {
                let got = check_feasible(&cfg, &s.occupancy, &s.pending, r.as_ref());
                let want = feasible_by_enumeration(&cfg, &s.occupancy, &s.pending, r.as_ref());
                if got != want {
                    fail.push(format!("{r:?} at {s:?}: model {got}, enumeration {want}"));
                }
                cases += 1;
            }
        }
        cases
    })
}

/// A feasible large parcel implies feasible smaller parcels with the same
/// customer type and lead time.
pub fn monotonicity(states: usize, seed: u64) -> SuiteReport {
    SuiteReport::run("size monotonicity", |fail| {
        let cfg = Layout::main().config(Setting::parse("1id").expect("valid"));
        let days = 10;
        let instances = (states / (days as usize * cfg.slots)).max(1) as u64 + 1;
        let visited = visit_states(&cfg, seed ^ 0x33, instances, days, 0.95);
        let mut n = 0;
        for s in visited.demand.iter().take(states) {
            n += 1;
            for c in 0..cfg.customers() {
                for lead in 1..=cfg.max_lead {
                    let ok: Vec<bool> = (0..cfg.sizes())
                        .map(|size| check_feasible(&cfg, &s.occupancy, &s.pending, Some(&Request { customer: c, size, lead })))
                        .collect();
                    for big in 1..ok.len() {
                        if ok[big] && ok[..big].iter().any(|v| !v) {
                            fail.push(format!("c{} e{lead}: {ok:?} at day {} slot {}", c + 1, s.day, s.slot));
                        }
                    }
                }
            }
        }
        n
    })
}

fn score(weights: &WindowWeights, counts: &[Vec<i64>]) -> (i64, i64) {
    let mut p = 0;
    let mut s = 0;
    for (delta, row) in counts.iter().enumerate() {
        for (k, &n) in row.iter().enumerate() {
            p += weights.primary[delta][k] * n;
            s += weights.secondary[delta][k] * n;
        }
    }
    (p, s)
}

/// The folded DL and LD weights reach the same primary and secondary values
/// as an explicit two-stage solve.
pub fn lexicographic(states: usize, seed: u64, fault: Option<Fault>) -> SuiteReport {
    SuiteReport::run("lexicographic fidelity", |fail| {
        let cfg = Layout::main().config(Setting::parse("2pf").expect("valid"));
        let days = 20;
        let instances = (states as u64).div_ceil(days as u64);
        let visited = visit_states(&cfg, seed ^ 0x1e, instances, days, 0.95);
        let mut cases = 0;
        for s in visited.allocation.iter().take(states) {
            for scheme in [CfaScheme::DL, CfaScheme::LD] {
                let weights = window_weights_with(scheme, &cfg.compartments, cfg.horizon(), None).expect("window scheme");
                let (model, vars) = cfa_model_with(&cfg, &s.occupancy, &s.pending, scheme, fault);
                let single = ilp_solve(&model);
                let staged = solve_two_stage(&model, &vars.windows.total, &weights.primary, &weights.secondary);
                match (single, staged) {
                    (Ok(IlpOutcome::Optimal { assignment: a, .. }), Ok(IlpOutcome::Optimal { assignment: b, .. })) => {
                        let (x, y) = (score(&weights, &vars.window_counts(&a)), score(&weights, &vars.window_counts(&b)));
                        if x != y {
                            fail.push(format!("{scheme} day {}: folded {x:?}, two-stage {y:?}", s.day));
                        }
                    }
                    other => fail.push(format!("{scheme} day {}: {other:?}", s.day)),
                }
                cases += 1;
            }
        }
        cases
    })
}

/// Window counts of the allocation model against the best explicit row
/// packing.
pub fn window_oracle(states: usize, seed: u64, fault: Option<Fault>) -> SuiteReport {
    SuiteReport::run("window oracle", |fail| {
        let cfg = window_config();
        let days = 15;
        let instances = (states as u64).div_ceil(days as u64);
        let visited = visit_states(&cfg, seed ^ 0x3d, instances, days, 0.9);
        let mut cases = 0;
        for s in visited.allocation.iter().take(states) {
            for scheme in [CfaScheme::DL, CfaScheme::LD] {
                let weights = window_weights_with(scheme, &cfg.compartments, cfg.horizon(), None).expect("window scheme");
                let (model, vars) = cfa_model_with(&cfg, &s.occupancy, &s.pending, scheme, fault);
                let Some((best, sets)) = best_window_packings(&cfg, &s.occupancy, &s.pending, &weights) else {
                    fail.push(format!("no explicit packing for {s:?}"));
                    continue;
                };
                match ilp_solve(&model) {
                    Ok(IlpOutcome::Optimal { assignment, .. }) => {
                        let counts = vars.window_counts(&assignment);
                        let multiset: WindowMultiset = counts
                            .iter()
                            .enumerate()
                            .flat_map(|(d, row)| row.iter().enumerate().filter(|(_, &n)| n > 0).map(move |(k, &n)| ((d, k + 1), n as u32)))
                            .collect();
                        let got = score(&weights, &counts);
                        if got != best || !sets.contains(&multiset) {
                            fail.push(format!("{scheme} day {}: model {multiset:?} {got:?}, packings {best:?}", s.day));
                        }
                    }
                    other => fail.push(format!("{scheme} day {}: {other:?}", s.day)),
                }
                cases += 1;
            }
        }
        cases
    })
}

fn partitions(n: usize, max_part: usize, prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
    if n == 0 {
        out.push(prefix.clone());
        return;
    }
    for part in (1..=n.min(max_part)).rev() {
        prefix.push(part);
        partitions(n - part, part, prefix, out);
        prefix.pop();
    }
}

/// One long window outscores any split of its length into shorter ones,
/// in the length term and in the full DL and LD weights.
pub fn window_dominance(max_len: usize) -> SuiteReport {
    SuiteReport::run("window dominance", |fail| {
        let capacity = Layout::main().compartments;
        let weights: Vec<WindowWeights> = [CfaScheme::DL, CfaScheme::LD]
            .into_iter()
            .map(|s| window_weights_with(s, &capacity, max_len, None).expect("window scheme"))
            .collect();
        let mut cases = 0;
        for total in 2..=max_len {
            let mut all = Vec::new();
            partitions(total, total, &mut Vec::new(), &mut all);
            for parts in all.into_iter().filter(|p| p.len() >= 2) {
                cases += 1;
                let split: usize = parts.iter().map(|&l| 2 * l - 1).sum();
                if 2 * total - 1 <= split {
                    fail.push(format!("length term: {total} vs {parts:?}"));
                }
                for w in &weights {
                    for delta in 0..capacity.len() {
                        let whole = w.v[delta][total - 1];
                        let pieces: f64 = parts.iter().map(|&l| w.v[delta][l - 1]).sum();
                        if whole <= pieces {
                            fail.push(format!("size {} weights: {total} vs {parts:?}", delta + 1));
                        }
                    }
                }
            }
        }
        cases
    })
}

fn random_int_model(rng: &mut ChaCha8Rng) -> IntModel {
    let mut m = if rng.random_bool(0.2) { IntModel::feasibility() } else { IntModel::new() };
    let n = rng.random_range(1..=6);
    for j in 0..n {
        let lo = rng.random_range(-1..=1);
        let hi = lo + rng.random_range(0..=3);
        m.add_var(format!("x{j}"), lo, hi, rng.random_range(-5..=5) as f64);
    }
    for _ in 0..rng.random_range(0..=4) {
        let mut terms = Vec::new();
        for j in 0..n {
            if rng.random_bool(0.6) {
                terms.push((j, rng.random_range(-3..=3)));
            }
        }
        let sense = match rng.random_range(0..10) {
            0 => Sense::Eq,
            1..=3 => Sense::Ge,
            _ => Sense::Le,
        };
        let rhs = if sense == Sense::Ge { rng.random_range(-4..=2) } else { rng.random_range(-1..=6) };
        m.add_constraint("", terms, sense, rhs);
    }
    m
}

pub fn ilp_oracle(models: usize, seed: u64) -> SuiteReport {
    SuiteReport::run("integer solver", |fail| {
        let mut rng = rng_for(&[seed, 0x11b]);
        for case in 0..models {
            let m = random_int_model(&mut rng);
            let expected = enumerate_ilp(&m);
            match (expected, ilp_solve(&m)) {
                (None, Ok(IlpOutcome::Infeasible)) => {}
                (Some(v), Ok(IlpOutcome::Optimal { assignment, objective })) => {
                    if !m.is_feasible(&assignment) || (!m.feasibility_only && objective != v) {
                        fail.push(format!("case {case}: {objective} vs {v}"));
                    }
                }
                (e, g) => fail.push(format!("case {case}: {e:?} vs {g:?}")),
            }
        }
        models
    })
}

pub fn lp_oracle(problems: usize, seed: u64) -> SuiteReport {
    SuiteReport::run("linear solver", |fail| {
        let mut rng = rng_for(&[seed, 0x1b]);
        for case in 0..problems {
            let n = rng.random_range(1..=10);
            let extra = rng.random_range(0..=(13 - n.min(12)));
            let c: Vec<f64> = (0..n).map(|_| rng.random_range(-4.0..4.0)).collect();
            let mut rows = vec![(vec![1.0; n], Sense::Le, rng.random_range(1.0..10.0))];
            for _ in 0..extra {
                let a: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
                let sense = [Sense::Le, Sense::Ge, Sense::Eq][rng.random_range(0..3)];
                rows.push((a, sense, rng.random_range(-2.0..6.0)));
            }
            let mut lp = LpModel::new();
            for (j, &cj) in c.iter().enumerate() {
                lp.add_var(format!("x{j}"), cj);
            }
            for (a, s, b) in &rows {
                lp.add_row(a.iter().copied().enumerate().collect(), *s, *b);
            }
            match (vertex_enumeration(&c, &rows), lp_solve(&lp)) {
                (None, Ok(LpOutcome::Infeasible)) => {}
                (Some(v), Ok(LpOutcome::Optimal { objective, .. })) if (v - objective).abs() <= 1e-8 * (1.0 + v.abs()) => {}
                (e, g) => fail.push(format!("case {case}: {e:?} vs {g:?}")),
            }
        }
        problems
    })
}

/// Ridge problems with the chain and sign constraints used for value
/// weights, against a long dual projected-gradient run.
pub fn qp_oracle(problems: usize, steps: usize, seed: u64) -> SuiteReport {
    SuiteReport::run("ridge solver", |fail| {
        let mut rng = rng_for(&[seed, 0x9b]);
        for case in 0..problems {
            let p = rng.random_range(2..=5);
            let rows = rng.random_range(p + 2..=12);
            let design = DMatrix::from_fn(rows, p, |_, j| if j == 0 { 1.0 } else { rng.random_range(-2.0..2.0) });
            let targets = DVector::from_fn(rows, |_, _| rng.random_range(-3.0..3.0));
            let mut prob = RidgeProblem::unconstrained(design, targets, rng.random_range(0.0..2.0));
            prob.penalized[0] = false;
            for j in 2..p {
                let mut coeffs = vec![0.0; p];
                coeffs[j] = 1.0;
                coeffs[j - 1] = -1.0;
                prob.constraints.push(LinearInequality { coeffs, rhs: 0.0 });
            }
            let mut coeffs = vec![0.0; p];
            coeffs[1] = 1.0;
            prob.constraints.push(LinearInequality { coeffs, rhs: 0.0 });

            let sol = match qp_ridge_constrained(&prob) {
                Ok(s) => s,
                Err(e) => {
                    fail.push(format!("case {case}: {e}"));
                    continue;
                }
            };
            if sol.kkt_residual > 1e-9 {
                fail.push(format!("case {case}: KKT residual {:e}", sol.kkt_residual));
            }
            let (h, g) = prob.quadratic_form();
            let h: Vec<Vec<f64>> = (0..h.nrows()).map(|i| h.row(i).iter().copied().collect()).collect();
            let a: Vec<Vec<f64>> = prob.constraints.iter().map(|c| c.coeffs.clone()).collect();
            let b: Vec<f64> = prob.constraints.iter().map(|c| c.rhs).collect();
            match dual_projected_gradient(&h, g.as_slice(), &a, &b, steps) {
                Some(theta) => {
                    let reference = prob.objective(&DVector::from_vec(theta));
                    if (sol.objective - reference).abs() > 1e-6 * (1.0 + reference.abs()) {
                        fail.push(format!("case {case}: objective {} vs {reference}", sol.objective));
                    }
                }
                None => fail.push(format!("case {case}: reference failed")),
            }
        }
        problems
    })
}

/// Frequency within three binomial standard deviations of `p`; exact for
/// degenerate `p`.
fn within_3_sigma(freq: f64, p: f64, n: usize) -> bool {
    if p <= 0.0 || p >= 1.0 {
        return (freq - p).abs() < 1e-12;
    }
    (freq - p).abs() <= 3.0 * (p * (1.0 - p) / n as f64).sqrt() + 1e-12
}

fn setting_configs() -> Vec<ProblemConfig> {
    PickupScenario::ALL
        .into_iter()
        .map(|pickup| Layout::main().config(Setting { premium_weight: 1, pickup }))
        .collect()
}

/// Draws `(b, q)` until the parcel is still present after `t` slots of
/// day `h`.
fn surviving_tag(cfg: &ProblemConfig, c: usize, h: usize, t: usize, rng: &mut ChaCha8Rng) -> usize {
    loop {
        let b = sample_pickup_day(cfg, c, rng);
        let q = rng.random_range(1..=cfg.slots);
        if b > h || (b == h && q > t) {
            return b;
        }
    }
}

/// Residual pickup law against rejection sampling and against its own
/// sampler.
pub fn pickup_laws(samples: usize, seed: u64) -> SuiteReport {
    SuiteReport::run("pickup laws", |fail| {
        let mut cases = 0;
        for (k, cfg) in setting_configs().iter().enumerate() {
            let t_max = cfg.slots;
            for c in 0..cfg.customers() {
                for h in 1..cfg.max_storage {
                    for t in [0, 1, t_max / 2, t_max] {
                        let Ok(law) = residual_pickup_distribution(cfg, c, h, t) else {
                            fail.push(format!("setting {k} c{c} h{h} t{t}: degenerate"));
                            continue;
                        };
                        let mut rng = rng_for(&[seed, 0x9c, k as u64, c as u64, h as u64, t as u64]);
                        let mut rejection = vec![0usize; cfg.max_storage];
                        let mut sampled = vec![0usize; cfg.max_storage];
                        for _ in 0..samples {
                            rejection[surviving_tag(cfg, c, h, t, &mut rng) - 1] += 1;
                            let (beta, q) = sample_residual_tag(cfg, c, h, t, &mut rng).expect("checked above");
                            sampled[beta - 1] += 1;
                            if beta < h || (beta == h && q <= t) {
                                fail.push(format!("setting {k} c{c} h{h} t{t}: sampled a past pickup ({beta}, {q})"));
                            }
                        }
                        for b in 0..cfg.max_storage {
                            for (what, counts) in [("rejection", &rejection), ("sampler", &sampled)] {
                                cases += 1;
                                let freq = counts[b] as f64 / samples as f64;
                                if !within_3_sigma(freq, law[b], samples) {
                                    fail.push(format!("setting {k} c{c} h{h} t{t} β{}: {what} {freq} vs {}", b + 1, law[b]));
                                }
                            }
                        }
                    }
                }
            }
        }
        cases
    })
    .three_sigma()
}

/// Expected demand and occupancy tables of the linear benchmark against
/// simulation.
pub fn dlp_tables(samples: usize, seed: u64) -> SuiteReport {
    SuiteReport::run("benchmark tables", |fail| {
        const HORIZON: usize = 5;
        let mut cases = 0;
        for (k, cfg) in setting_configs().iter().enumerate() {
            let (nd, nc, t_max) = (cfg.sizes(), cfg.customers(), cfg.slots);
            for t_now in [1, t_max / 2, t_max] {
                let expected = dlp_expected_demand(cfg, t_now, HORIZON);
                let mut rng = rng_for(&[seed, 0xd1, k as u64, t_now as u64]);
                let mut sums = vec![vec![vec![0u64; HORIZON]; nc]; nd];
                for _ in 0..samples {
                    for a in 1..=HORIZON {
                        let slots = if a == 1 { t_max - t_now } else { t_max };
                        for _ in 0..slots {
                            if let Some(r) = cfg.arrival.sample(rng.random::<f64>()) {
                                let phi = a + r.lead - 1;
                                if phi <= HORIZON {
                                    sums[r.size][r.customer][phi - 1] += 1;
                                }
                            }
                        }
                    }
                }
                for d in 0..nd {
                    for c in 0..nc {
                        for phi in 1..=HORIZON {
                            cases += 1;
                            let mut var = 0.0;
                            for a in 1..=phi {
                                let e = phi - a + 1;
                                if e > cfg.max_lead {
                                    continue;
                                }
                                let slots = if a == 1 { t_max - t_now } else { t_max } as f64;
                                let p = cfg.arrival.request_probability(&Request { customer: c, size: d, lead: e });
                                var += slots * p * (1.0 - p);
                            }
                            let mean = sums[d][c][phi - 1] as f64 / samples as f64;
                            let want = expected[d][c][phi - 1];
                            let ok = if var == 0.0 {
                                (mean - want).abs() < 1e-12
                            } else {
                                (mean - want).abs() <= 3.0 * (var / samples as f64).sqrt()
                            };
                            if !ok {
                                fail.push(format!("setting {k} t{t_now} demand d{} c{} φ{phi}: {mean} vs {want}", d + 1, c + 1));
                            }
                        }
                    }
                }

                let (p_locker, p_alloc) = dlp_occupancy_probs(cfg, t_now, HORIZON);
                for c in 0..nc {
                    let mut rng = rng_for(&[seed, 0xd2, k as u64, t_now as u64, c as u64]);
                    let days: Vec<usize> = (0..samples).map(|_| sample_pickup_day(cfg, c, &mut rng)).collect();
                    for gap in 0..HORIZON {
                        let freq = days.iter().filter(|&&b| gap == 0 || b >= gap).count() as f64 / samples as f64;
                        for theta in 1..=HORIZON - gap {
                            if p_alloc[c][theta - 1][theta + gap - 1] != p_alloc[c][0][gap] {
                                fail.push(format!("setting {k} c{} allocated-day table not shift invariant", c + 1));
                            }
                        }
                        cases += 1;
                        if !within_3_sigma(freq, p_alloc[c][0][gap], samples) {
                            fail.push(format!("setting {k} c{} allocated gap {gap}: {freq} vs {}", c + 1, p_alloc[c][0][gap]));
                        }
                    }
                    for h in 1..cfg.max_storage {
                        let betas: Vec<usize> = (0..samples).map(|_| surviving_tag(cfg, c, h, t_now, &mut rng)).collect();
                        for phi in 1..=HORIZON {
                            cases += 1;
                            let freq = betas.iter().filter(|&&b| b + 1 >= h + phi).count() as f64 / samples as f64;
                            let want = p_locker[c][h - 1][phi - 1];
                            if !within_3_sigma(freq, want, samples) {
                                fail.push(format!("setting {k} t{t_now} c{} h{h} φ{phi}: {freq} vs {want}", c + 1));
                            }
                        }
                    }
                }
            }
        }
        cases
    })
    .three_sigma()
}
