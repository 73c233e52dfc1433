//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any fails.

use std::fs;
use std::path::Path;
use std::time::{Duration, Instant};

use anyhow::{ensure, Result};
use locker_cli::pipeline::{self, read_results, summarize, Run};
use locker_cli::{ExperimentConfig, Scale};
use locker_core::allocation::{check_feasible, decide_allocation, CfaScheme};
use locker_core::domain::{Layout, Setting};
use locker_core::selfcheck::{self, visit_states, SuiteReport};
use locker_core::sim::paired_t_test;
use locker_core::stochastic::build_scenario_stream;

const SEED: u64 = 1;

fn suites(reports: &[SuiteReport], limit: Option<Duration>) -> Result<String> {
    let mut notes = Vec::new();
    for r in reports {
        eprintln!("    {r}");
        ensure!(r.passed(), "{} failed {} of {} cases", r.name, r.failures.len(), r.cases);
        if let Some(limit) = limit {
            ensure!(r.elapsed < limit, "{} took {:.2?}", r.name, r.elapsed);
        }
        notes.push(format!("{} {} cases", r.name, r.cases));
    }
    Ok(notes.join(", "))
}

fn worked_example() -> Result<String> {
    suites(&[selfcheck::worked_example()], Some(Duration::from_secs(1)))
}

fn feasibility_oracle() -> Result<String> {
    suites(&[selfcheck::feasibility_oracle(600, SEED)], Some(Duration::from_secs(120)))
}

fn monotonicity() -> Result<String> {
    suites(&[selfcheck::monotonicity(1000, SEED)], None)
}

fn lexicographic() -> Result<String> {
    suites(&[selfcheck::lexicographic(100, SEED, None)], None)
}

fn window_dominance() -> Result<String> {
    suites(&[selfcheck::window_dominance(8)], None)
}

fn solvers() -> Result<String> {
    suites(
        &[
            selfcheck::ilp_oracle(1000, SEED),
            selfcheck::lp_oracle(300, SEED),
            selfcheck::qp_oracle(5, 1_000_000, SEED),
        ],
        None,
    )
}

fn stochastic_laws() -> Result<String> {
    suites(
        &[selfcheck::pickup_laws(100_000, SEED), selfcheck::dlp_tables(100_000, SEED)],
        None,
    )
}

fn run_pipeline(run: &Run) -> Result<()> {
    pipeline::generate(run)?;
    pipeline::train_all(run)?;
    pipeline::evaluate_all(run)?;
    pipeline::report(run)?;
    Ok(())
}

fn objectives(rows: &[pipeline::ResultRow], policy: &str) -> Vec<f64> {
    let mut v: Vec<_> = rows.iter().filter(|r| r.policy == policy).map(|r| (r.instance, r.weighted_objective)).collect();
    v.sort_by_key(|x| x.0);
    v.into_iter().map(|x| x.1).collect()
}

fn desk_performance() -> Result<String> {
    let dir = tempfile::tempdir()?;
    let mut cfg = ExperimentConfig::preset(Scale::Desk);
    cfg.output = dir.path().to_path_buf();
    let run = Run::new(cfg, 1, false);
    run_pipeline(&run)?;
    let rows = read_results(&run.report_dir().join("results.csv"))?;
    let summary = summarize(&rows, "FC_DL")?;
    let imp = |p: &str| summary.overall[p];
    let base = objectives(&rows, "FC_DL");
    let mut notes = Vec::new();
    for p in ["V-ER_DL", "V-CER_DL"] {
        let test = paired_t_test(&objectives(&rows, p), &base);
        notes.push(format!("{p} {:+.2}% p={:.2e}", imp(p), test.p_greater));
        ensure!(imp(p) > 0.0 && test.p_greater < 0.05, "{p}: {:+.2}% p={:.3}", imp(p), test.p_greater);
    }
    let (rv, td) = (imp("RV-CER_DL"), imp("V-TD_DL"));
    notes.push(format!("RV-CER_DL {rv:+.2}% V-TD_DL {td:+.2}%"));
    ensure!(rv >= td, "RV-CER_DL {rv:+.2}% below V-TD_DL {td:+.2}%");
    Ok(notes.join(", "))
}

fn small_config(out: &Path) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::preset(Scale::Desk);
    cfg.output = out.to_path_buf();
    cfg.training.days = 30;
    cfg.training.epsilon_days = 15;
    cfg.training.replay_start = 5;
    cfg.evaluation.instances = 3;
    cfg.evaluation.days = 4;
    cfg.evaluation.warmup = 2;
    cfg
}

fn mismatch_harness() -> Result<String> {
    let dir = tempfile::tempdir()?;
    let mut cfg = small_config(dir.path());
    cfg.policies = CfaScheme::ALL.map(|s| format!("RV-CER_{}", s.code())).to_vec();
    let standard = Run::new(cfg.clone(), 1, false);
    run_pipeline(&standard)?;
    let mismatch = Run::new(cfg, 1, true);
    run_pipeline(&mismatch)?;

    let table_file = mismatch.report_dir().join("mismatch.csv");
    ensure!(table_file.exists(), "no mismatch table");
    let std_rows = read_results(&standard.report_dir().join("results.csv"))?;
    let mm_rows = read_results(&mismatch.report_dir().join("results.csv"))?;
    let table = pipeline::mismatch_table(&mismatch, &summarize(&mm_rows, "FC_DL")?)?;
    let std_summary = summarize(&std_rows, "FC_DL")?;
    ensure!(table[0].iter().flatten().all(Option::is_some), "table has empty cells");
    for (i, s) in CfaScheme::ALL.iter().enumerate() {
        let label = format!("RV-CER_{}", s.code());
        let a: Vec<_> = std_rows.iter().filter(|r| r.policy == label).collect();
        let b: Vec<_> = mm_rows.iter().filter(|r| r.policy == label).collect();
        ensure!(!a.is_empty() && a == b, "{label}: results differ from the standard pipeline");
        let (x, y) = (table[0][i][i].unwrap(), std_summary.overall[&label]);
        ensure!(x.to_bits() == y.to_bits(), "{label}: {x} vs {y}");
    }
    Ok(format!("3x3 table, diagonal matches over {} rows", std_rows.len()))
}

fn files_under(root: &Path) -> Result<Vec<(String, Vec<u8>)>> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in fs::read_dir(&dir)? {
            let path = entry?.path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let name = path.strip_prefix(root)?.display().to_string();
                out.push((name, fs::read(&path)?));
            }
        }
    }
    out.sort();
    Ok(out)
}

fn determinism() -> Result<String> {
    let (a, b) = (tempfile::tempdir()?, tempfile::tempdir()?);
    for dir in [&a, &b] {
        let mut cfg = small_config(dir.path());
        cfg.settings = vec!["1id".into(), "3pu".into()];
        cfg.policies = ["FC_DL", "V-ER_LD", "RV-CER_BU", "DLP_DL", "R_DL"].map(String::from).to_vec();
        run_pipeline(&Run::new(cfg, 1, false))?;
    }
    let (fa, fb) = (files_under(a.path())?, files_under(b.path())?);
    ensure!(fa.len() > 5 && fa == fb, "output trees differ");

    let layout = Layout::main();
    let mut streams = 0;
    for instance in 0..10 {
        let texts: Vec<String> = Setting::grid()
            .into_iter()
            .map(|s| build_scenario_stream(&layout.config(s), SEED, instance, 40).to_text())
            .collect();
        ensure!(texts.iter().all(|t| t == &texts[0]), "instance {instance}: arrivals depend on the setting");
        streams += texts.len();
    }
    Ok(format!("{} identical files, {streams} streams agree", fa.len()))
}

fn median(mut v: Vec<Duration>) -> Duration {
    v.sort();
    v[v.len() / 2]
}

fn latency() -> Result<String> {
    let cfg = Layout::main().config(Setting::parse("3pu").expect("known setting"));
    let visited = visit_states(&cfg, SEED, 2, 20, 0.9);
    let requests = cfg.all_requests();
    let mut feas = Vec::new();
    for (i, s) in visited.demand.iter().enumerate().step_by(3) {
        let r = &requests[i % requests.len()];
        let t = Instant::now();
        std::hint::black_box(check_feasible(&cfg, &s.occupancy, &s.pending, Some(r)));
        feas.push(t.elapsed());
    }
    let mut alloc = Vec::new();
    for (i, s) in visited.allocation.iter().enumerate() {
        let t = Instant::now();
        std::hint::black_box(decide_allocation(&cfg, &s.occupancy, &s.pending, CfaScheme::ALL[i % 3])?);
        alloc.push(t.elapsed());
    }
    let (f, a) = (median(feas.clone()), median(alloc.clone()));
    ensure!(f < Duration::from_millis(10), "median feasibility check {f:.2?}");
    ensure!(a < Duration::from_millis(50), "median allocation {a:.2?}");
    Ok(format!("feasibility {f:.2?} over {}, allocation {a:.2?} over {}", feas.len(), alloc.len()))
}

fn main() {
    let criteria: [(&str, fn() -> Result<String>); 11] = [
        ("worked example replay", worked_example),
        ("feasibility oracle", feasibility_oracle),
        ("size monotonicity", monotonicity),
        ("lexicographic weights", lexicographic),
        ("window dominance", window_dominance),
        ("solver oracles", solvers),
        ("stochastic laws", stochastic_laws),
        ("desk performance", desk_performance),
        ("mismatch harness", mismatch_harness),
        ("determinism and common arrivals", determinism),
        ("latency floor", latency),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let id = (i + 1).to_string();
        if !filter.is_empty() && !filter.iter().any(|f| *f == id || name.contains(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let outcome = check();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(note) => println!("PASS {id:>2} {name} ({secs:.1}s): {note}"),
            Err(e) => {
                failed += 1;
                println!("FAIL {id:>2} {name} ({secs:.1}s): {e:#}");
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
