//! Reference checks that compare the production models against brute-force
//! or closed-form answers. Each suite returns a report rather than
//! panicking so the command-line self test can print them all.

pub mod oracle;
mod suites;

use std::fmt;
use std::time::{Duration, Instant};

pub use suites::*;

use crate::allocation::{check_feasible, decide_allocation, CfaScheme};
use crate::domain::{PreDecisionState, ProblemConfig};
use crate::sim::Engine;
use crate::stochastic::{build_scenario_stream, rng_for};
use rand::Rng;

#[derive(Debug, Clone)]
pub struct SuiteReport {
    pub name: &'static str,
    pub cases: usize,
    pub failures: Vec<String>,
    /// Failures expected from sampling noise alone when every law is right.
    pub chance_failures: f64,
    pub elapsed: Duration,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty() && self.cases > 0
    }

    fn run(name: &'static str, body: impl FnOnce(&mut Vec<String>) -> usize) -> Self {
        let start = Instant::now();
        let mut failures = Vec::new();
        let cases = body(&mut failures);
        Self {
            name,
            cases,
            failures,
            chance_failures: 0.0,
            elapsed: start.elapsed(),
        }
    }

    /// Marks each case as a two-sided three-sigma check.
    fn three_sigma(mut self) -> Self {
        self.chance_failures = self.cases as f64 * 0.0027;
        self
    }
}

impl fmt::Display for SuiteReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {:<24} {:>6} cases {:>9.3}s",
            if self.passed() { "PASS" } else { "FAIL" },
            self.name,
            self.cases,
            self.elapsed.as_secs_f64()
        )?;
        if self.chance_failures > 0.0 {
            write!(f, "  {} outside, {:.1} expected by chance", self.failures.len(), self.chance_failures)?;
        }
        for msg in self.failures.iter().take(5) {
            write!(f, "\n    {msg}")?;
        }
        if self.failures.len() > 5 {
            write!(f, "\n    ... {} more", self.failures.len() - 5)?;
        }
        Ok(())
    }
}

/// States visited by a randomized accept-if-feasible policy.
#[derive(Debug, Default)]
pub struct VisitedStates {
    pub demand: Vec<PreDecisionState>,
    pub allocation: Vec<PreDecisionState>,
}

/// Simulates `instances` streams of `days` days, accepting each feasible
/// request with probability `accept` and allocating with a rotating scheme.
pub fn visit_states(cfg: &ProblemConfig, seed: u64, instances: u64, days: u32, accept: f64) -> VisitedStates {
    let mut out = VisitedStates::default();
    let mut rng = rng_for(&[seed, 0x5e1f]);
    for instance in 0..instances {
        let stream = build_scenario_stream(cfg, seed, instance, days);
        let mut engine = Engine::new(cfg, &stream);
        for day in 0..days {
            for _ in 0..cfg.slots {
                let s = engine.advance().expect("stream covers the run");
                let take = s.request.request().is_some_and(|r| check_feasible(cfg, &s.occupancy, &s.pending, Some(r)))
                    && rng.random_bool(accept);
                engine.decide(&s, take).expect("feasible decisions");
                out.demand.push(s);
            }
            let s = engine.advance().expect("stream covers the run");
            let scheme = CfaScheme::ALL[(day as usize + instance as usize) % 3];
            let plan = decide_allocation(cfg, &s.occupancy, &s.pending, scheme).expect("reachable states allocate");
            engine.allocate(&s, &plan).expect("valid allocation");
            out.allocation.push(s);
        }
    }
    out
}

/// Problem sizes for [`run_all`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Effort {
    /// Sizes quoted by the acceptance targets.
    Full,
    /// A fraction, for quick runs.
    Quick,
}

/// Every reference suite in a fixed order.
pub fn run_all(effort: Effort, seed: u64) -> Vec<SuiteReport> {
    let full = effort == Effort::Full;
    let pick = |f: usize, q: usize| if full { f } else { q };
    vec![
        worked_example(),
        feasibility_oracle(pick(600, 100), seed),
        monotonicity(pick(1000, 150), seed),
        lexicographic(pick(100, 20), seed, None),
        window_oracle(pick(150, 30), seed, None),
        window_dominance(8),
        ilp_oracle(pick(1000, 200), seed),
        lp_oracle(pick(300, 60), seed),
        qp_oracle(pick(5, 2), if full { 1_000_000 } else { 200_000 }, seed),
        pickup_laws(pick(100_000, 20_000), seed),
        dlp_tables(pick(100_000, 20_000), seed),
    ]
}

/// Each deliberate model defect with whether the suite meant to notice it
/// did.
pub fn mutation_checks(seed: u64) -> Vec<(&'static str, bool)> {
    use crate::allocation::Fault;
    vec![
        ("window end rule off by one", !window_oracle(60, seed, Some(Fault::WindowEndOffByOne)).passed()),
        ("secondary weight bound of one", !lexicographic(60, seed, Some(Fault::WrongUpperBound)).passed()),
    ]
}
