use locker_core::allocation::{check_feasible, decide_allocation, CfaScheme};
use locker_core::domain::{
    apply_allocation, apply_demand_control, apply_exogenous, ExogenousInfo, Layout, LockerOccupancy, PickupScenario,
    ProblemConfig, Request, Setting,
};
use locker_core::policies::{fc_decide, vfa_decide, DemandControl, PolicyPair, PolicyParams};
use locker_core::selfcheck::oracle::{feasible_by_enumeration, tiny_config};
use locker_core::selfcheck::visit_states;
use locker_core::sim::{run_episode, EpochRecord};
use locker_core::stochastic::{build_scenario_stream, rng_for};
use locker_core::vfa::{ridge_fit, satisfies_structure, FeatureEngine, FeatureVector};
use proptest::prelude::*;
use rand::Rng;

fn desk(pickup: PickupScenario) -> ProblemConfig {
    Layout::desk().config(Setting { premium_weight: 2, pickup })
}

fn scenario() -> impl Strategy<Value = PickupScenario> {
    prop::sample::select(PickupScenario::ALL.to_vec())
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 16, ..ProptestConfig::default() })]

    #[test]
    fn reachable_states_respect_capacity(seed in any::<u64>(), accept in 0.3f64..1.0, pickup in scenario()) {
        let cfg = desk(pickup);
        let visited = visit_states(&cfg, seed, 1, 6, accept);
        for s in visited.demand.iter().chain(&visited.allocation) {
            for (delta, &q) in cfg.compartments.iter().enumerate() {
                prop_assert!(s.occupancy.in_size(delta) <= q);
            }
            // Reachable states always admit the empty decision.
            prop_assert!(check_feasible(&cfg, &s.occupancy, &s.pending, None));
        }
    }

    #[test]
    fn rejecting_then_no_pickups_keeps_the_state(seed in any::<u64>(), pickup in scenario()) {
        let cfg = desk(pickup);
        let visited = visit_states(&cfg, seed, 1, 4, 0.8);
        for s in visited.demand.iter().filter(|s| s.slot < cfg.slots) {
            let post = apply_demand_control(&cfg, s, false).unwrap();
            let next = apply_exogenous(&post, &ExogenousInfo {
                day: s.day,
                slot: s.slot + 1,
                request: s.request,
                pickups: LockerOccupancy::empty(&cfg),
            }).unwrap();
            prop_assert_eq!(&next.occupancy, &s.occupancy);
            prop_assert_eq!(&next.pending, &s.pending);
        }
    }

    #[test]
    fn allocation_shifts_the_order_book(seed in any::<u64>(), pickup in scenario()) {
        let cfg = desk(pickup);
        let visited = visit_states(&cfg, seed, 1, 5, 0.9);
        for s in &visited.allocation {
            let due: u32 = s.pending.cells().filter(|c| c.2 == 1).map(|c| c.3).sum();
            let plan = decide_allocation(&cfg, &s.occupancy, &s.pending, CfaScheme::DL).unwrap();
            prop_assert_eq!(plan.total(), due);
            let post = apply_allocation(&cfg, s, &plan).unwrap();
            prop_assert_eq!(post.pending.total(), s.pending.total() - due);
            prop_assert!(post.pending.cells().all(|c| c.2 < cfg.horizon()));
            let leaving: u32 = s.occupancy.cells().filter(|c| c.2 == cfg.max_storage - 1).map(|c| c.3).sum();
            prop_assert_eq!(post.occupancy.total(), s.occupancy.total() - leaving + due);
        }
    }

    #[test]
    fn smaller_parcels_stay_feasible(seed in any::<u64>(), pickup in scenario()) {
        let cfg = desk(pickup);
        let visited = visit_states(&cfg, seed, 1, 5, 0.95);
        for s in &visited.demand {
            for customer in 0..cfg.customers() {
                for lead in 1..=cfg.max_lead {
                    let ok: Vec<bool> = (0..cfg.sizes())
                        .map(|size| check_feasible(&cfg, &s.occupancy, &s.pending, Some(&Request { customer, size, lead })))
                        .collect();
                    for big in 1..ok.len() {
                        prop_assert!(!ok[big] || ok[..big].iter().all(|&v| v), "{:?}", ok);
                    }
                }
            }
        }
    }

    #[test]
    fn feasibility_matches_explicit_packing(seed in any::<u64>()) {
        let cfg = tiny_config();
        let visited = visit_states(&cfg, seed, 1, 10, 0.85);
        for s in &visited.demand {
            for r in cfg.all_requests() {
                prop_assert_eq!(
                    check_feasible(&cfg, &s.occupancy, &s.pending, Some(&r)),
                    feasible_by_enumeration(&cfg, &s.occupancy, &s.pending, Some(&r))
                );
            }
        }
    }

    #[test]
    fn arrivals_do_not_depend_on_the_setting(seed in any::<u64>(), instance in 0u64..50) {
        let streams: Vec<_> = PickupScenario::ALL
            .into_iter()
            .flat_map(|p| [1, 2, 3].map(move |m| Layout::desk().config(Setting { premium_weight: m, pickup: p })))
            .map(|cfg| build_scenario_stream(&cfg, seed, instance, 5))
            .collect();
        for s in &streams[1..] {
            prop_assert_eq!(s.arrivals(), streams[0].arrivals());
            prop_assert_eq!(s.to_text(), streams[0].to_text());
        }
    }

    #[test]
    fn value_decision_ignores_the_intercept(seed in any::<u64>(), shift in -50.0f64..50.0) {
        let cfg = desk(PickupScenario::ALL[1]);
        let visited = visit_states(&cfg, seed, 1, 2, 0.9);
        let len = FeatureVector::zeros(&cfg).len();
        let mut rng = rng_for(&[seed, 3]);
        let theta: Vec<f64> = (0..len).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut shifted = theta.clone();
        shifted[0] += shift;
        let mut fe = FeatureEngine::new(CfaScheme::DL, 2);
        for s in visited.demand.iter().filter(|s| s.request.request().is_some()).take(6) {
            let a = vfa_decide(&cfg, s, &theta, &mut fe, seed).unwrap();
            let b = vfa_decide(&cfg, s, &shifted, &mut fe, seed).unwrap();
            prop_assert_eq!(a, b);
            prop_assert!(!a || fc_decide(&cfg, s));
        }
    }

    #[test]
    fn structured_fits_are_monotone(seed in any::<u64>()) {
        let cfg = desk(PickupScenario::ALL[0]);
        let len = FeatureVector::zeros(&cfg).len();
        let mut rng = rng_for(&[seed, 9]);
        let feats: Vec<FeatureVector> = (0..3 * len)
            .map(|_| {
                let mut v: Vec<f64> = (0..len).map(|_| rng.random_range(0.0..3.0)).collect();
                v[0] = 1.0;
                FeatureVector(v)
            })
            .collect();
        let targets: Vec<f64> = (0..feats.len()).map(|_| rng.random_range(-5.0..5.0)).collect();
        let refs: Vec<&FeatureVector> = feats.iter().collect();
        let theta = ridge_fit(&refs, &targets, 0.1, Some((cfg.sizes(), cfg.horizon() + cfg.max_storage - 1))).unwrap();
        prop_assert!(satisfies_structure(&theta, cfg.sizes(), cfg.horizon() + cfg.max_storage - 1, 1e-7));
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 8, ..ProptestConfig::default() })]

    #[test]
    fn episodes_account_for_every_request(seed in any::<u64>(), warmup in 0u32..3, pickup in scenario()) {
        let cfg = desk(pickup);
        let pair = PolicyPair::new(&cfg, DemandControl::FC, CfaScheme::LD, None, PolicyParams::default(), false).unwrap();
        let stream = build_scenario_stream(&cfg, seed, 0, 8);
        let r = run_episode(&cfg, &pair, &stream, 8, warmup, seed).unwrap();
        let again = run_episode(&cfg, &pair, &stream, 8, warmup, seed).unwrap();
        prop_assert_eq!(&r, &again);

        let mut due = vec![0u32; 16];
        for q in r.requests.iter().filter(|q| q.accepted) {
            due[(q.day + q.request.lead as u32 - 1) as usize] += 1;
        }
        for rec in &r.decisions {
            if let EpochRecord::Allocation { day, plan } = rec {
                prop_assert_eq!(plan.total(), due[*day as usize]);
            }
        }
        // From each allocation until the next one the count only falls.
        for span in r.occupancy[cfg.slots..].chunks(cfg.slots + 1) {
            for w in span.windows(2) {
                prop_assert!(w[1].occupied <= w[0].occupied);
            }
        }
        let expected: f64 = r.measured().filter(|q| q.accepted).map(|q| cfg.priority[q.request.customer]).sum();
        prop_assert_eq!(r.weighted_reward, expected);
        prop_assert!(r.requests.iter().all(|q| !q.accepted || q.feasible));
    }
}
