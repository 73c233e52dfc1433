use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use anyhow::{bail, ensure, Context, Result};
use locker_core::allocation::CfaScheme;
use locker_core::domain::PickupScenario;
use locker_core::selfcheck::{mutation_checks, run_all, Effort};
use locker_core::sim::{
    evaluate, improvement, mean, t_interval, EvaluationReport, WeightKey, WeightStore,
};
use locker_core::stochastic::{build_scenario_stream, derive_seed};
use locker_core::vfa::{train, TrainedWeights, Variant};
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;

const TRAIN_JOB: u64 = 0x7e1;

/// One run of a subcommand: the config plus the command-line switches.
#[derive(Debug, Clone)]
pub struct Run {
    pub cfg: ExperimentConfig,
    pub jobs: usize,
    pub mismatch: bool,
}

impl Run {
    pub fn new(cfg: ExperimentConfig, jobs: usize, mismatch: bool) -> Self {
        Self {
            cfg,
            jobs: jobs.max(1),
            mismatch,
        }
    }

    /// Report directory; mismatch runs keep theirs apart.
    pub fn report_dir(&self) -> PathBuf {
        if self.mismatch {
            self.cfg.output.join("mismatch")
        } else {
            self.cfg.output.clone()
        }
    }

    pub fn weights_dir(&self) -> PathBuf {
        self.cfg.output.join("weights")
    }

    fn header(&self) -> String {
        let c = &self.cfg;
        format!(
            "# config {}\n# seed {} instances {} warmup {} days {}\n",
            c.hash(),
            c.seed,
            c.evaluation.instances,
            c.evaluation.warmup,
            c.evaluation.days
        )
    }
}

/// Runs `f` over `items` on up to `jobs` threads; results keep input order.
fn parallel_map<T: Sync, R: Send>(items: &[T], jobs: usize, f: impl Fn(&T) -> R + Sync) -> Vec<R> {
    let slots: Mutex<Vec<Option<R>>> = Mutex::new((0..items.len()).map(|_| None).collect());
    let next = AtomicUsize::new(0);
    std::thread::scope(|scope| {
        for _ in 0..jobs.clamp(1, items.len().max(1)) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(item) = items.get(i) else { break };
                let r = f(item);
                slots.lock().expect("no panics while locked")[i] = Some(r);
            });
        }
    });
    slots
        .into_inner()
        .expect("workers joined")
        .into_iter()
        .map(|r| r.expect("every item ran"))
        .collect()
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

/// Writes one stream file per evaluation instance.
pub fn generate(run: &Run) -> Result<Vec<PathBuf>> {
    let c = &run.cfg;
    let setting = c.settings()?[0];
    let problem = c.problem(setting);
    let days = c.evaluation.warmup + c.evaluation.days;
    let header = run.header();
    let mut paths = Vec::new();
    for instance in 0..c.evaluation.instances {
        let stream = build_scenario_stream(&problem, c.seed, instance, days);
        let path = c
            .output
            .join("streams")
            .join(format!("instance_{instance:03}.txt"));
        write_file(&path, &format!("{header}{}", stream.to_text()))?;
        paths.push(path);
    }
    Ok(paths)
}

/// A weight set to train.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrainingJob {
    pub key: WeightKey,
    pub set: u32,
    pub seed: u64,
}

fn index_of<T: PartialEq>(all: &[T], x: &T) -> u64 {
    all.iter().position(|y| y == x).expect("known value") as u64
}

/// Seed of one weight set. It depends on the key and set number only, so a
/// pair trains identically whether or not it is part of a mismatch run.
pub fn training_seed(base: u64, key: &WeightKey, set: u32) -> u64 {
    derive_seed(&[
        base,
        TRAIN_JOB,
        u64::from(key.setting.premium_weight),
        index_of(&PickupScenario::ALL, &key.setting.pickup),
        index_of(&Variant::ALL, &key.variant),
        index_of(&CfaScheme::ALL, &key.features),
        index_of(&CfaScheme::ALL, &key.allocation),
        u64::from(set),
    ])
}

pub fn training_jobs(run: &Run) -> Result<Vec<TrainingJob>> {
    let mut keys = Vec::new();
    for setting in run.cfg.settings()? {
        for spec in run.cfg.specs(run.mismatch)? {
            if let Some(key) = WeightKey::for_spec(setting, &spec) {
                if !keys.contains(&key) {
                    keys.push(key);
                }
            }
        }
    }
    Ok(keys
        .into_iter()
        .flat_map(|key| {
            (0..run.cfg.weight_sets).map(move |set| TrainingJob {
                key,
                set,
                seed: training_seed(run.cfg.seed, &key, set),
            })
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightDocument {
    pub config: String,
    pub setting: String,
    pub set: u32,
    pub weights: TrainedWeights,
}

pub fn weight_path(dir: &Path, key: &WeightKey, set: u32) -> PathBuf {
    dir.join(format!(
        "{}_{}_{}-{}_{set}.json",
        key.setting.name(),
        key.variant.code(),
        key.features,
        key.allocation
    ))
}

/// Trains every weight set the configured policies need.
pub fn train_all(run: &Run) -> Result<Vec<PathBuf>> {
    let jobs = training_jobs(run)?;
    let hash = run.cfg.hash();
    let dir = run.weights_dir();
    let results = parallel_map(&jobs, run.jobs, |job| -> Result<PathBuf> {
        let cfg = run.cfg.problem(job.key.setting);
        let (weights, _) = train(
            &cfg,
            job.key.features,
            job.key.allocation,
            job.key.variant,
            &run.cfg.training,
            job.seed,
        )
        .with_context(|| {
            format!(
                "training {}",
                weight_path(Path::new(""), &job.key, job.set).display()
            )
        })?;
        let doc = WeightDocument {
            config: hash.clone(),
            setting: job.key.setting.name(),
            set: job.set,
            weights,
        };
        let path = weight_path(&dir, &job.key, job.set);
        write_file(&path, &(serde_json::to_string_pretty(&doc)? + "\n"))?;
        Ok(path)
    });
    results.into_iter().collect()
}

/// Reads the weight sets of every value-based policy and checks that they
/// came from the current training parameters.
pub fn load_weights(run: &Run) -> Result<WeightStore> {
    let mut store = WeightStore::new();
    for job in training_jobs(run)? {
        let path = weight_path(&run.weights_dir(), &job.key, job.set);
        let text = fs::read_to_string(&path)
            .with_context(|| format!("missing weights {}; run `train` first", path.display()))?;
        let doc: WeightDocument =
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        let w = &doc.weights;
        ensure!(
            w.variant == job.key.variant
                && w.feature_scheme == job.key.features
                && w.allocation_scheme == job.key.allocation,
            "{} holds weights for a different policy",
            path.display()
        );
        ensure!(
            w.seed == job.seed && w.params == run.cfg.training,
            "{} is stale; run `train` again",
            path.display()
        );
        store.entry(job.key).or_default().push(doc.weights);
    }
    Ok(store)
}

pub fn evaluate_all(run: &Run) -> Result<EvaluationReport> {
    let weights = load_weights(run)?;
    let report = evaluate(
        &run.cfg.layout,
        &run.cfg.settings()?,
        &run.cfg.specs(run.mismatch)?,
        run.cfg.baseline_spec()?,
        &weights,
        &run.cfg.protocol(),
        run.jobs,
    )?;
    write_reports(run, &report)?;
    Ok(report)
}

fn csv_text<S: Serialize>(
    header: &str,
    columns: &[&str],
    rows: impl IntoIterator<Item = S>,
) -> Result<String> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(Vec::new());
    w.write_record(columns)?;
    for r in rows {
        w.serialize(r)?;
    }
    let body = String::from_utf8(w.into_inner().map_err(|e| anyhow::anyhow!("{e}"))?)?;
    Ok(format!("{header}{body}"))
}

/// Writes `results.csv`, `rates.csv` and `occupancy.csv`.
pub fn write_reports(run: &Run, report: &EvaluationReport) -> Result<Vec<PathBuf>> {
    let dir = run.report_dir();
    let header = run.header();
    let results = csv_text(
        &header,
        &[
            "setting",
            "policy",
            "instance",
            "weighted_objective",
            "accepted",
            "requests",
        ],
        report.instances.iter().map(|r| {
            (
                &r.setting,
                &r.policy,
                r.instance,
                r.weighted_objective,
                r.accepted,
                r.requests,
            )
        }),
    )?;
    let rates = csv_text(
        &header,
        &["setting", "policy", "slicer", "cell", "rate"],
        report
            .rates
            .iter()
            .map(|r| (&r.setting, &r.policy, r.slicer.code(), &r.cell, r.rate)),
    )?;
    let occupancy = csv_text(
        &header,
        &["setting", "policy", "day", "slot", "occupied", "pending"],
        report
            .occupancy
            .iter()
            .map(|r| (&r.setting, &r.policy, r.day, r.slot, r.occupied, r.pending)),
    )?;
    let mut paths = Vec::new();
    for (name, text) in [
        ("results.csv", results),
        ("rates.csv", rates),
        ("occupancy.csv", occupancy),
    ] {
        let path = dir.join(name);
        write_file(&path, &text)?;
        paths.push(path);
    }
    Ok(paths)
}

/// One line of `results.csv`.
#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct ResultRow {
    pub setting: String,
    pub policy: String,
    pub instance: u64,
    pub weighted_objective: f64,
    pub accepted: f64,
    pub requests: usize,
}

pub fn read_results(path: &Path) -> Result<Vec<ResultRow>> {
    let mut r = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(path)
        .with_context(|| format!("reading {}; run `evaluate` first", path.display()))?;
    r.deserialize().map(|row| row.map_err(Into::into)).collect()
}

/// Summary statistics derived from a results file.
#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub baseline: String,
    /// `(setting, policy) -> (mean, 99% interval, improvement)`.
    pub cells: BTreeMap<(String, String), (f64, (f64, f64), f64)>,
    /// Improvement averaged over settings.
    pub overall: BTreeMap<String, f64>,
}

pub fn summarize(rows: &[ResultRow], baseline: &str) -> Result<Summary> {
    let mut grouped: BTreeMap<(String, String), Vec<(u64, f64)>> = BTreeMap::new();
    for r in rows {
        grouped
            .entry((r.setting.clone(), r.policy.clone()))
            .or_default()
            .push((r.instance, r.weighted_objective));
    }
    let values = |v: &Vec<(u64, f64)>| {
        let mut v = v.clone();
        v.sort_by_key(|x| x.0);
        v.into_iter().map(|x| x.1).collect::<Vec<f64>>()
    };
    let mut cells = BTreeMap::new();
    let mut per_policy: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for ((setting, policy), v) in &grouped {
        let Some(base) = grouped.get(&(setting.clone(), baseline.to_string())) else {
            bail!("no baseline {baseline} results for setting {setting}");
        };
        let (v, base) = (values(v), values(base));
        let imp = improvement(&v, &base);
        cells.insert(
            (setting.clone(), policy.clone()),
            (mean(&v), t_interval(&v, 0.99), imp),
        );
        per_policy.entry(policy.clone()).or_default().push(imp);
    }
    let overall = per_policy.into_iter().map(|(p, v)| (p, mean(&v))).collect();
    Ok(Summary {
        baseline: baseline.to_string(),
        cells,
        overall,
    })
}

/// Overall improvement of each mismatch cell, `table[k][features][allocation]`.
pub fn mismatch_table(run: &Run, summary: &Summary) -> Result<Vec<Vec<Vec<Option<f64>>>>> {
    Ok(run
        .cfg
        .mismatch_grid()?
        .iter()
        .map(|grid| {
            grid.iter()
                .map(|row| {
                    row.iter()
                        .map(|spec| summary.overall.get(&spec.to_string()).copied())
                        .collect()
                })
                .collect()
        })
        .collect())
}

/// Reads `results.csv`, writes `summary.csv` (and `mismatch.csv` in
/// mismatch mode) and returns a printable summary.
pub fn report(run: &Run) -> Result<String> {
    let dir = run.report_dir();
    let rows = read_results(&dir.join("results.csv"))?;
    let summary = summarize(&rows, &run.cfg.baseline)?;
    let header = run.header();
    let mut out = String::new();
    let _ = writeln!(
        out,
        "improvement over {} (99% interval of the mean objective)",
        summary.baseline
    );
    let mut table = Vec::new();
    for ((setting, policy), (m, (lo, hi), imp)) in &summary.cells {
        let _ = writeln!(
            out,
            "{setting:>5} {policy:<16} {m:>10.3} [{lo:>9.3}, {hi:>9.3}] {imp:>+8.2}%"
        );
        table.push((setting.as_str(), policy.as_str(), *m, *lo, *hi, *imp));
    }
    for (policy, imp) in &summary.overall {
        let _ = writeln!(out, "{:>5} {policy:<16} {imp:>+8.2}%", "all");
    }
    write_file(
        &dir.join("summary.csv"),
        &csv_text(
            &header,
            &[
                "setting",
                "policy",
                "mean_objective",
                "ci_low",
                "ci_high",
                "improvement",
            ],
            table,
        )?,
    )?;

    if run.mismatch {
        let grids = mismatch_table(run, &summary)?;
        let mut rows = Vec::new();
        for (k, grid) in grids.iter().enumerate() {
            let control = &run.cfg.mismatch_controls[k];
            let _ = writeln!(out, "\n{control}: features (rows) by allocation (columns)");
            let _ = writeln!(
                out,
                "      {}",
                CfaScheme::ALL.map(|s| format!("{:>9}", s.code())).join("")
            );
            for (f, row) in grid.iter().enumerate() {
                let cells: String = row
                    .iter()
                    .map(|v| v.map_or(format!("{:>9}", "-"), |x| format!("{x:>+8.2}%")))
                    .collect();
                let _ = writeln!(out, "{:>5} {cells}", CfaScheme::ALL[f].code());
                for (a, v) in row.iter().enumerate() {
                    rows.push((
                        control.as_str(),
                        CfaScheme::ALL[f].code(),
                        CfaScheme::ALL[a].code(),
                        *v,
                    ));
                }
            }
        }
        write_file(
            &dir.join("mismatch.csv"),
            &csv_text(
                &header,
                &["control", "features", "allocation", "improvement"],
                rows,
            )?,
        )?;
    }
    Ok(out)
}

/// Runs every reference suite and the planted-fault checks.
pub fn selftest(effort: Effort, seed: u64, out: &mut impl std::io::Write) -> Result<bool> {
    let mut ok = true;
    for r in run_all(effort, seed) {
        ok &= r.passed();
        writeln!(out, "{r}")?;
        out.flush()?;
    }
    for (name, caught) in mutation_checks(seed) {
        ok &= caught;
        writeln!(
            out,
            "{} planted fault: {name}",
            if caught { "PASS" } else { "FAIL" }
        )?;
    }
    Ok(ok)
}
