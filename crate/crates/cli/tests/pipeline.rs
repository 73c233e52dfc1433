use locker_cli::pipeline::{self, read_results, summarize, Run};
use locker_cli::{ExperimentConfig, Scale};
use locker_core::stochastic::{build_scenario_stream, ScenarioStream};

fn small(dir: &std::path::Path) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::preset(Scale::Desk);
    cfg.output = dir.to_path_buf();
    cfg.policies = ["FC_DL", "V-TD_LD", "R_BU"].map(String::from).to_vec();
    cfg.training.days = 12;
    cfg.training.epsilon_days = 6;
    cfg.training.replay_start = 3;
    cfg.evaluation.instances = 2;
    cfg.evaluation.days = 3;
    cfg.evaluation.warmup = 1;
    cfg
}

#[test]
fn generated_streams_read_back() {
    let dir = tempfile::tempdir().unwrap();
    let run = Run::new(small(dir.path()), 1, false);
    let paths = pipeline::generate(&run).unwrap();
    assert_eq!(paths.len(), 2);
    let problem = run.cfg.problem(run.cfg.settings().unwrap()[0]);
    for (i, p) in paths.iter().enumerate() {
        let text = std::fs::read_to_string(p).unwrap();
        assert!(text.starts_with(&format!("# config {}", run.cfg.hash())));
        let parsed = ScenarioStream::from_text(&text).unwrap();
        assert_eq!(parsed, build_scenario_stream(&problem, run.cfg.seed, i as u64, 4));
    }
}

#[test]
fn evaluation_needs_trained_weights_from_the_same_config() {
    let dir = tempfile::tempdir().unwrap();
    let run = Run::new(small(dir.path()), 1, false);
    assert!(pipeline::evaluate_all(&run).is_err());
    pipeline::train_all(&run).unwrap();
    let mut changed = run.cfg.clone();
    changed.training.days = 13;
    assert!(pipeline::evaluate_all(&Run::new(changed, 1, false)).is_err());
    pipeline::evaluate_all(&run).unwrap();
}

#[test]
fn reports_follow_the_results() {
    let dir = tempfile::tempdir().unwrap();
    let run = Run::new(small(dir.path()), 2, false);
    pipeline::train_all(&run).unwrap();
    let report = pipeline::evaluate_all(&run).unwrap();
    let text = pipeline::report(&run).unwrap();
    let rows = read_results(&dir.path().join("results.csv")).unwrap();
    assert_eq!(rows.len(), 3 * 2);
    assert!(rows.iter().all(|r| r.accepted <= r.requests as f64));
    let summary = summarize(&rows, "FC_DL").unwrap();
    assert_eq!(summary.overall["FC_DL"], 0.0);
    for p in ["FC_DL", "V-TD_LD", "R_BU"] {
        assert!(text.contains(p), "{text}");
    }
    for f in ["rates.csv", "occupancy.csv", "summary.csv"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    let serial = Run::new(small(dir.path()), 1, false);
    assert_eq!(pipeline::evaluate_all(&serial).unwrap(), report);
}
