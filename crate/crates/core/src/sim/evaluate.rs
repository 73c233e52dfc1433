use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};
use thiserror::Error;

use crate::allocation::CfaScheme;
use crate::domain::{Layout, Setting};
use crate::policies::{parse_descriptor, DemandControl, PolicyError, PolicyPair, PolicyParams};
use crate::stochastic::{build_scenario_stream, derive_seed};
use crate::vfa::{TrainedWeights, Variant};

use super::{run_episode, RequestRecord};

const POLICY_SEED: u64 = 0x9e1;

/// A policy pair as evaluated. `features` names the scheme behind the
/// value features and equals `allocation` outside mismatch experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PolicySpec {
    pub control: DemandControl,
    pub allocation: CfaScheme,
    pub features: CfaScheme,
}

impl PolicySpec {
    pub fn new(control: DemandControl, allocation: CfaScheme) -> Self {
        Self {
            control,
            allocation,
            features: allocation,
        }
    }

    /// Every demand-control method with every allocation scheme.
    pub fn grid() -> Vec<PolicySpec> {
        let mut out = Vec::new();
        for control in DemandControl::ALL {
            for scheme in CfaScheme::ALL {
                out.push(PolicySpec::new(control, scheme));
            }
        }
        out
    }

    pub fn is_mismatched(&self) -> bool {
        self.features != self.allocation && self.control.variant().is_some()
    }

    /// `RV-CER_LD`, or `RV-CER_LD/BU` when the features use BU.
    pub fn parse(s: &str) -> Result<Self, PolicyError> {
        let (head, features) = match s.split_once('/') {
            Some((h, f)) => (h, Some(CfaScheme::parse(f).ok_or_else(|| PolicyError::Descriptor(s.to_string()))?)),
            None => (s, None),
        };
        let (control, allocation) = parse_descriptor(head)?;
        Ok(Self {
            control,
            allocation,
            features: features.unwrap_or(allocation),
        })
    }
}

impl fmt::Display for PolicySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}_{}", self.control, self.allocation)?;
        if self.is_mismatched() {
            write!(f, "/{}", self.features)?;
        }
        Ok(())
    }
}

/// Identifies the weights a value-based policy needs in one setting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct WeightKey {
    pub setting: Setting,
    pub variant: Variant,
    pub features: CfaScheme,
    pub allocation: CfaScheme,
}

impl WeightKey {
    pub fn for_spec(setting: Setting, spec: &PolicySpec) -> Option<Self> {
        spec.control.variant().map(|variant| Self {
            setting,
            variant,
            features: spec.features,
            allocation: spec.allocation,
        })
    }
}

/// Independently trained weight sets per key.
pub type WeightStore = HashMap<WeightKey, Vec<TrainedWeights>>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalProtocol {
    pub instances: u64,
    /// Measured days per instance.
    pub days: u32,
    pub warmup: u32,
    pub seed: u64,
    pub policy: PolicyParams,
}

impl Default for EvalProtocol {
    fn default() -> Self {
        Self {
            instances: 30,
            days: 30,
            warmup: 10,
            seed: 1,
            policy: PolicyParams::default(),
        }
    }
}

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("no weights for {policy} in setting {setting}")]
    MissingWeights { policy: String, setting: String },
    #[error("{policy} in setting {setting}, instance {instance}: {source}")]
    Policy {
        policy: String,
        setting: String,
        instance: u64,
        #[source]
        source: PolicyError,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Slicer {
    Customer,
    CustomerLead,
    CustomerSize,
}

impl Slicer {
    pub const ALL: [Slicer; 3] = [Slicer::Customer, Slicer::CustomerLead, Slicer::CustomerSize];

    pub fn code(self) -> &'static str {
        match self {
            Slicer::Customer => "c",
            Slicer::CustomerLead => "c,e",
            Slicer::CustomerSize => "c,d",
        }
    }
}

/// Acceptance counts of one attribute cell. Cells are 1-based in labels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RateCell {
    pub customer: usize,
    pub second: Option<usize>,
    pub accepted: u64,
    pub requests: u64,
}

impl RateCell {
    pub fn rate(&self) -> f64 {
        self.accepted as f64 / self.requests as f64
    }

    pub fn label(&self, slicer: Slicer) -> String {
        match (slicer, self.second) {
            (Slicer::CustomerLead, Some(e)) => format!("c{}e{}", self.customer + 1, e),
            (Slicer::CustomerSize, Some(d)) => format!("c{}d{}", self.customer + 1, d + 1),
            _ => format!("c{}", self.customer + 1),
        }
    }
}

/// Accepted over arrived requests per cell. Cells without requests are
/// left out.
pub fn acceptance_rates<'a>(records: impl IntoIterator<Item = &'a RequestRecord>, slicer: Slicer) -> Vec<RateCell> {
    let mut cells: BTreeMap<(usize, Option<usize>), (u64, u64)> = BTreeMap::new();
    for r in records {
        let second = match slicer {
            Slicer::Customer => None,
            Slicer::CustomerLead => Some(r.request.lead),
            Slicer::CustomerSize => Some(r.request.size),
        };
        let cell = cells.entry((r.request.customer, second)).or_default();
        cell.0 += u64::from(r.accepted);
        cell.1 += 1;
    }
    cells
        .into_iter()
        .map(|((customer, second), (accepted, requests))| RateCell {
            customer,
            second,
            accepted,
            requests,
        })
        .collect()
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Relative improvement of the mean objective in percent.
pub fn improvement(policy: &[f64], baseline: &[f64]) -> f64 {
    let base = mean(baseline);
    (mean(policy) - base) / base * 100.0
}

/// Two-sided t confidence interval for the mean.
pub fn t_interval(values: &[f64], level: f64) -> (f64, f64) {
    let n = values.len();
    let m = mean(values);
    if n < 2 {
        return (m, m);
    }
    let var = values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1) as f64;
    let se = (var / n as f64).sqrt();
    let t = StudentsT::new(0.0, 1.0, (n - 1) as f64).expect("n >= 2").inverse_cdf(0.5 + level / 2.0);
    (m - t * se, m + t * se)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairedTest {
    pub mean_difference: f64,
    pub t: f64,
    /// One-sided p-value for a positive mean difference.
    pub p_greater: f64,
}

/// Paired t-test of `policy - baseline` against zero.
pub fn paired_t_test(policy: &[f64], baseline: &[f64]) -> PairedTest {
    assert_eq!(policy.len(), baseline.len());
    let diff: Vec<f64> = policy.iter().zip(baseline).map(|(a, b)| a - b).collect();
    let n = diff.len() as f64;
    let m = mean(&diff);
    let var = diff.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0);
    let se = (var / n).sqrt();
    let t = if se > 0.0 {
        m / se
    } else if m > 0.0 {
        f64::INFINITY
    } else if m < 0.0 {
        f64::NEG_INFINITY
    } else {
        0.0
    };
    let p_greater = if t.is_finite() {
        1.0 - StudentsT::new(0.0, 1.0, n - 1.0).expect("n >= 2").cdf(t)
    } else if t > 0.0 {
        0.0
    } else {
        1.0
    };
    PairedTest {
        mean_difference: m,
        t,
        p_greater,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceResult {
    pub setting: String,
    pub policy: String,
    pub instance: u64,
    /// Mean over weight sets.
    pub weighted_objective: f64,
    pub accepted: f64,
    pub requests: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicySummary {
    pub setting: String,
    pub policy: String,
    pub mean_objective: f64,
    pub ci99: (f64, f64),
    /// Percent over the baseline in this setting.
    pub improvement: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateRow {
    pub setting: String,
    pub policy: String,
    pub slicer: Slicer,
    pub cell: String,
    pub rate: f64,
}

/// Mean occupancy over instances and weight sets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OccupancyRow {
    pub setting: String,
    pub policy: String,
    pub day: u32,
    pub slot: usize,
    pub occupied: f64,
    pub pending: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub baseline: String,
    pub instances: Vec<InstanceResult>,
    pub summaries: Vec<PolicySummary>,
    /// Per policy, the improvement averaged over settings.
    pub overall: Vec<(String, f64)>,
    pub rates: Vec<RateRow>,
    pub occupancy: Vec<OccupancyRow>,
}

impl EvaluationReport {
    pub fn objectives(&self, setting: &str, policy: &str) -> Vec<f64> {
        self.instances
            .iter()
            .filter(|r| r.setting == setting && r.policy == policy)
            .map(|r| r.weighted_objective)
            .collect()
    }

    pub fn summary(&self, setting: &str, policy: &str) -> Option<&PolicySummary> {
        self.summaries.iter().find(|s| s.setting == setting && s.policy == policy)
    }

    pub fn overall_improvement(&self, policy: &str) -> Option<f64> {
        self.overall.iter().find(|(p, _)| p == policy).map(|&(_, v)| v)
    }
}

struct GroupResult {
    instances: Vec<InstanceResult>,
    rates: Vec<RateRow>,
    occupancy: Vec<OccupancyRow>,
}

fn run_group(
    layout: &Layout,
    setting: Setting,
    spec: &PolicySpec,
    weights: &WeightStore,
    protocol: &EvalProtocol,
) -> Result<GroupResult, EvalError> {
    let cfg = layout.config(setting);
    let (policy, setting_name) = (spec.to_string(), setting.name());
    let pairs: Vec<PolicyPair> = match WeightKey::for_spec(setting, spec) {
        None => vec![None],
        Some(key) => {
            let sets = weights.get(&key).filter(|v| !v.is_empty()).ok_or_else(|| EvalError::MissingWeights {
                policy: policy.clone(),
                setting: setting_name.clone(),
            })?;
            sets.iter().cloned().map(Some).collect()
        }
    }
    .into_iter()
    .map(|w| PolicyPair::new(&cfg, spec.control, spec.allocation, w, protocol.policy, spec.is_mismatched()))
    .collect::<Result<_, _>>()
    .map_err(|source| EvalError::Policy {
        policy: policy.clone(),
        setting: setting_name.clone(),
        instance: 0,
        source,
    })?;

    let total_days = protocol.warmup + protocol.days;
    let sets = pairs.len() as f64;
    let mut instances = Vec::new();
    let mut counts: BTreeMap<(Slicer, usize, Option<usize>), (u64, u64)> = BTreeMap::new();
    let mut occ: BTreeMap<(u32, usize), (u64, u64)> = BTreeMap::new();
    for instance in 0..protocol.instances {
        let stream = build_scenario_stream(&cfg, protocol.seed, instance, total_days);
        let seed = derive_seed(&[protocol.seed, POLICY_SEED, instance]);
        let mut objective = 0.0;
        let mut accepted = 0.0;
        let mut requests = 0;
        for pair in &pairs {
            let r = run_episode(&cfg, pair, &stream, total_days, protocol.warmup, seed).map_err(|source| EvalError::Policy {
                policy: policy.clone(),
                setting: setting_name.clone(),
                instance,
                source,
            })?;
            objective += r.weighted_reward;
            accepted += r.accepted() as f64;
            requests = r.request_count();
            let measured: Vec<&RequestRecord> = r.measured().collect();
            for slicer in Slicer::ALL {
                for cell in acceptance_rates(measured.iter().copied(), slicer) {
                    let c = counts.entry((slicer, cell.customer, cell.second)).or_default();
                    c.0 += cell.accepted;
                    c.1 += cell.requests;
                }
            }
            for o in &r.occupancy {
                let c = occ.entry((o.day, o.slot)).or_default();
                c.0 += u64::from(o.occupied);
                c.1 += u64::from(o.pending);
            }
        }
        instances.push(InstanceResult {
            setting: setting_name.clone(),
            policy: policy.clone(),
            instance,
            weighted_objective: objective / sets,
            accepted: accepted / sets,
            requests,
        });
    }
    let rates = counts
        .into_iter()
        .map(|((slicer, customer, second), (accepted, requests))| {
            let cell = RateCell {
                customer,
                second,
                accepted,
                requests,
            };
            RateRow {
                setting: setting_name.clone(),
                policy: policy.clone(),
                slicer,
                cell: cell.label(slicer),
                rate: cell.rate(),
            }
        })
        .collect();
    let runs = sets * protocol.instances as f64;
    let occupancy = occ
        .into_iter()
        .map(|((day, slot), (o, p))| OccupancyRow {
            setting: setting_name.clone(),
            policy: policy.clone(),
            day,
            slot,
            occupied: o as f64 / runs,
            pending: p as f64 / runs,
        })
        .collect();
    Ok(GroupResult {
        instances,
        rates,
        occupancy,
    })
}

/// Runs every spec on every setting and instance. All policies of an
/// instance see the same arrivals and pickup behaviour; the arrivals are
/// also shared across settings. The result does not depend on `jobs`.
pub fn evaluate(
    layout: &Layout,
    settings: &[Setting],
    specs: &[PolicySpec],
    baseline: PolicySpec,
    weights: &WeightStore,
    protocol: &EvalProtocol,
    jobs: usize,
) -> Result<EvaluationReport, EvalError> {
    let groups: Vec<(Setting, PolicySpec)> = settings.iter().flat_map(|&s| specs.iter().map(move |&p| (s, p))).collect();
    let results: Mutex<Vec<Option<Result<GroupResult, EvalError>>>> = Mutex::new((0..groups.len()).map(|_| None).collect());
    let next = AtomicUsize::new(0);
    std::thread::scope(|scope| {
        for _ in 0..jobs.clamp(1, groups.len().max(1)) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some((setting, spec)) = groups.get(i) else { break };
                let r = run_group(layout, *setting, spec, weights, protocol);
                results.lock().expect("no panics while locked")[i] = Some(r);
            });
        }
    });

    let mut instances = Vec::new();
    let mut rates = Vec::new();
    let mut occupancy = Vec::new();
    for r in results.into_inner().expect("workers joined") {
        let g = r.expect("every group ran")?;
        instances.extend(g.instances);
        rates.extend(g.rates);
        occupancy.extend(g.occupancy);
    }

    let base_label = baseline.to_string();
    let mut summaries = Vec::new();
    let mut per_policy: Vec<(String, Vec<f64>)> = specs.iter().map(|p| (p.to_string(), Vec::new())).collect();
    for setting in settings {
        let name = setting.name();
        let objectives_of = |policy: &str| -> Vec<f64> {
            instances
                .iter()
                .filter(|r| r.setting == name && r.policy == policy)
                .map(|r| r.weighted_objective)
                .collect()
        };
        let base = objectives_of(&base_label);
        for (label, improvements) in &mut per_policy {
            let values = objectives_of(label);
            let improvement = (!base.is_empty()).then(|| improvement(&values, &base));
            if let Some(v) = improvement {
                improvements.push(v);
            }
            summaries.push(PolicySummary {
                setting: name.clone(),
                policy: label.clone(),
                mean_objective: mean(&values),
                ci99: t_interval(&values, 0.99),
                improvement,
            });
        }
    }
    let overall = per_policy
        .into_iter()
        .filter(|(_, v)| v.len() == settings.len() && !v.is_empty())
        .map(|(label, v)| (label, mean(&v)))
        .collect();
    Ok(EvaluationReport {
        baseline: base_label,
        instances,
        summaries,
        overall,
        rates,
        occupancy,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::Request;

    fn record(customer: usize, size: usize, lead: usize, accepted: bool) -> RequestRecord {
        RequestRecord {
            day: 1,
            slot: 1,
            request: Request { customer, size, lead },
            feasible: true,
            accepted,
        }
    }

    #[test]
    fn improvement_arithmetic() {
        assert_eq!(improvement(&[5.0, 7.0], &[5.0, 7.0]), 0.0);
        assert_eq!(improvement(&[10.0, 14.0], &[5.0, 7.0]), 100.0);
        // Means 20 and 16.
        assert!((improvement(&[18.0, 20.0, 22.0], &[15.0, 16.0, 17.0]) - 25.0).abs() < 1e-12);
    }

    #[test]
    fn rates_count_per_cell() {
        let log = vec![
            record(0, 0, 1, true),
            record(0, 1, 1, false),
            record(0, 1, 2, true),
            record(1, 2, 5, true),
        ];
        let by_c = acceptance_rates(&log, Slicer::Customer);
        assert_eq!(by_c.len(), 2);
        assert!((by_c[0].rate() - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(by_c[1].rate(), 1.0);
        let by_ce = acceptance_rates(&log, Slicer::CustomerLead);
        let labels: Vec<String> = by_ce.iter().map(|c| c.label(Slicer::CustomerLead)).collect();
        assert_eq!(labels, vec!["c1e1", "c1e2", "c2e5"]);
        assert_eq!(by_ce[0].rate(), 0.5);
        let by_cd = acceptance_rates(&log, Slicer::CustomerSize);
        assert_eq!(by_cd.iter().map(|c| c.label(Slicer::CustomerSize)).collect::<Vec<_>>(), vec!["c1d1", "c1d2", "c2d3"]);
    }

    #[test]
    fn paired_test_direction() {
        let base = [10.0, 12.0, 11.0, 13.0, 9.0];
        let better = [11.0, 13.5, 11.5, 14.0, 10.2];
        assert!(paired_t_test(&better, &base).p_greater < 0.01);
        assert!(paired_t_test(&base, &better).p_greater > 0.99);
        assert!(paired_t_test(&base, &base).p_greater >= 0.5);
    }

    #[test]
    fn t_interval_matches_table_value() {
        // t(0.995, 4) = 4.604.
        let v = [1.0, 2.0, 3.0, 4.0, 5.0];
        let (lo, hi) = t_interval(&v, 0.99);
        let half = 4.604094 * (2.5f64 / 5.0).sqrt();
        assert!((hi - 3.0 - half).abs() < 1e-5 && (3.0 - lo - half).abs() < 1e-5);
    }

    #[test]
    fn spec_labels_round_trip() {
        for spec in PolicySpec::grid() {
            assert_eq!(PolicySpec::parse(&spec.to_string()).unwrap(), spec);
        }
        let m = PolicySpec::parse("RV-CER_LD/BU").unwrap();
        assert!(m.is_mismatched());
        assert_eq!(m.to_string(), "RV-CER_LD/BU");
        assert_eq!(PolicySpec::grid().len(), 27);
    }

    fn small() -> EvalProtocol {
        EvalProtocol {
            instances: 2,
            days: 3,
            warmup: 1,
            seed: 4,
            policy: PolicyParams::default(),
        }
    }

    #[test]
    fn baseline_has_zero_improvement_and_order_does_not_matter() {
        let layout = Layout::desk();
        let settings = [Setting::parse("1id").unwrap(), Setting::parse("3pu").unwrap()];
        let fc = PolicySpec::new(DemandControl::FC, CfaScheme::DL);
        let bu = PolicySpec::new(DemandControl::FC, CfaScheme::BU);
        let dlp = PolicySpec::new(DemandControl::DLP, CfaScheme::LD);
        let store = WeightStore::new();
        let a = evaluate(&layout, &settings, &[fc, bu, dlp], fc, &store, &small(), 1).unwrap();
        let b = evaluate(&layout, &settings, &[dlp, fc, bu], fc, &store, &small(), 2).unwrap();
        assert_eq!(a.overall_improvement("FC_DL"), Some(0.0));
        for s in &a.summaries {
            assert_eq!(Some(s), b.summary(&s.setting, &s.policy));
        }
        let key = |r: &InstanceResult| (r.setting.clone(), r.policy.clone(), r.instance);
        let mut ia = a.instances.clone();
        let mut ib = b.instances.clone();
        ia.sort_by_key(key);
        ib.sort_by_key(key);
        assert_eq!(ia, ib);
    }

    #[test]
    fn single_cell_matches_the_episode() {
        let layout = Layout::desk();
        let setting = Setting::parse("2pf").unwrap();
        let fc = PolicySpec::new(DemandControl::FC, CfaScheme::LD);
        let p = small();
        let report = evaluate(&layout, &[setting], &[fc], fc, &WeightStore::new(), &p, 1).unwrap();
        let cfg = layout.config(setting);
        let pair = PolicyPair::new(&cfg, fc.control, fc.allocation, None, p.policy, false).unwrap();
        for i in 0..p.instances {
            let stream = build_scenario_stream(&cfg, p.seed, i, p.warmup + p.days);
            let r = run_episode(&cfg, &pair, &stream, p.warmup + p.days, p.warmup, derive_seed(&[p.seed, POLICY_SEED, i])).unwrap();
            assert_eq!(report.instances[i as usize].weighted_objective, r.weighted_reward);
            assert_eq!(report.instances[i as usize].requests, r.request_count());
        }
    }

    #[test]
    fn value_policies_need_weights() {
        let spec = PolicySpec::new(DemandControl::V(Variant::ER), CfaScheme::DL);
        let err = evaluate(&Layout::desk(), &[Setting::parse("1id").unwrap()], &[spec], spec, &WeightStore::new(), &small(), 1);
        assert!(matches!(err, Err(EvalError::MissingWeights { .. })));
    }
}
