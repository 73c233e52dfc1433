use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use clap::ValueEnum;
use locker_core::allocation::CfaScheme;
use locker_core::domain::{Layout, ProblemConfig, Setting};
use locker_core::policies::{parse_descriptor, PolicyParams};
use locker_core::sim::{EvalProtocol, PolicySpec};
use locker_core::vfa::TrainingParams;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Preset that fills in everything the config file leaves out.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Scale {
    /// Full locker, nine settings, every policy.
    Paper,
    /// Small locker and short runs for a laptop.
    Desk,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvaluationSection {
    pub instances: u64,
    /// Measured days per instance.
    pub days: u32,
    pub warmup: u32,
    pub policy: PolicyParams,
}

impl Default for EvaluationSection {
    fn default() -> Self {
        let p = EvalProtocol::default();
        Self {
            instances: p.instances,
            days: p.days,
            warmup: p.warmup,
            policy: p.policy,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scale: Scale,
    pub seed: u64,
    /// Where streams, weights and reports go. Not part of the config hash.
    pub output: PathBuf,
    pub layout: Layout,
    /// Setting names such as `3pu`.
    pub settings: Vec<String>,
    /// Policy labels such as `RV-CER_DL`.
    pub policies: Vec<String>,
    pub baseline: String,
    /// Demand-control methods crossed with every feature and allocation
    /// scheme in mismatch mode.
    pub mismatch_controls: Vec<String>,
    /// Independently trained weight sets per value-based policy.
    pub weight_sets: u32,
    pub training: TrainingParams,
    pub evaluation: EvaluationSection,
}

impl ExperimentConfig {
    pub fn preset(scale: Scale) -> Self {
        match scale {
            Scale::Paper => Self {
                scale,
                seed: 1,
                output: PathBuf::from("out"),
                layout: Layout::main(),
                settings: Setting::grid().iter().map(Setting::name).collect(),
                policies: PolicySpec::grid().iter().map(ToString::to_string).collect(),
                baseline: "FC_DL".into(),
                mismatch_controls: vec!["RV-CER".into()],
                weight_sets: 5,
                training: TrainingParams::default(),
                evaluation: EvaluationSection::default(),
            },
            Scale::Desk => Self {
                scale,
                seed: 1,
                output: PathBuf::from("out"),
                layout: Layout::desk(),
                settings: vec!["3pu".into()],
                policies: ["FC_DL", "V-TD_DL", "V-ER_DL", "V-CER_DL", "RV-CER_DL"]
                    .map(String::from)
                    .to_vec(),
                baseline: "FC_DL".into(),
                mismatch_controls: vec!["RV-CER".into()],
                weight_sets: 1,
                training: TrainingParams {
                    days: 300,
                    epsilon_days: 144,
                    ..TrainingParams::default()
                },
                evaluation: EvaluationSection {
                    instances: 15,
                    days: 15,
                    ..EvaluationSection::default()
                },
            },
        }
    }

    /// Reads `path` over the preset named by `scale`, the file's own
    /// `scale` key, or `paper`, in that order. `seed` overrides the file.
    pub fn load(path: Option<&Path>, scale: Option<Scale>, seed: Option<u64>) -> Result<Self> {
        let file: toml::Table = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .with_context(|| format!("reading {}", p.display()))?;
                toml::from_str(&text).with_context(|| format!("parsing {}", p.display()))?
            }
            None => toml::Table::new(),
        };
        let scale = match (scale, file.get("scale")) {
            (Some(s), _) => s,
            (None, Some(v)) => v.clone().try_into().context("bad scale")?,
            (None, None) => Scale::Paper,
        };
        let mut merged = toml::Table::try_from(Self::preset(scale))?;
        merge(&mut merged, file);
        merged.insert("scale".into(), toml::Value::try_from(scale)?);
        let mut cfg: Self = toml::Value::Table(merged)
            .try_into()
            .context("invalid experiment config")?;
        if let Some(s) = seed {
            cfg.seed = s;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        ensure!(!self.settings.is_empty(), "no settings");
        ensure!(self.weight_sets >= 1, "weight_sets must be at least 1");
        ensure!(
            self.evaluation.instances >= 1,
            "evaluation needs at least one instance"
        );
        for s in self.settings()? {
            self.problem(s)
                .validate()
                .with_context(|| format!("setting {}", s.name()))?;
        }
        self.specs(false)?;
        self.baseline_spec()?;
        self.mismatch_grid()?;
        Ok(())
    }

    pub fn settings(&self) -> Result<Vec<Setting>> {
        self.settings
            .iter()
            .map(|s| Setting::parse(s).with_context(|| format!("unknown setting {s:?}")))
            .collect()
    }

    pub fn problem(&self, setting: Setting) -> ProblemConfig {
        self.layout.config(setting)
    }

    pub fn baseline_spec(&self) -> Result<PolicySpec> {
        Ok(PolicySpec::parse(&self.baseline)?)
    }

    /// The configured policies, or the baseline plus the mismatch grid.
    pub fn specs(&self, mismatch: bool) -> Result<Vec<PolicySpec>> {
        if mismatch {
            let mut out = vec![self.baseline_spec()?];
            out.extend(self.mismatch_grid()?.into_iter().flatten().flatten());
            return Ok(out);
        }
        let mut out: Vec<PolicySpec> = Vec::new();
        for p in &self.policies {
            let spec = PolicySpec::parse(p)?;
            if spec.is_mismatched() {
                bail!("{p}: mismatched pairs need --mismatch");
            }
            out.push(spec);
        }
        let base = self.baseline_spec()?;
        if !out.contains(&base) {
            out.insert(0, base);
        }
        Ok(out)
    }

    /// `grid[k][f][a]`: control `k` with feature scheme `f` and allocation
    /// scheme `a`, both in [`CfaScheme::ALL`] order.
    pub fn mismatch_grid(&self) -> Result<Vec<Vec<Vec<PolicySpec>>>> {
        self.mismatch_controls
            .iter()
            .map(|c| {
                let (control, _) = parse_descriptor(&format!("{c}_DL"))?;
                if control.variant().is_none() {
                    bail!("{c}: mismatch experiments need a value-based method");
                }
                Ok(CfaScheme::ALL
                    .iter()
                    .map(|&features| {
                        CfaScheme::ALL
                            .iter()
                            .map(|&allocation| PolicySpec {
                                control,
                                allocation,
                                features,
                            })
                            .collect()
                    })
                    .collect())
            })
            .collect()
    }

    pub fn protocol(&self) -> EvalProtocol {
        EvalProtocol {
            instances: self.evaluation.instances,
            days: self.evaluation.days,
            warmup: self.evaluation.warmup,
            seed: self.seed,
            policy: self.evaluation.policy,
        }
    }

    /// SHA-256 over the canonical JSON form, leaving out the output path.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output = PathBuf::new();
        let json = serde_json::to_string(&c).expect("config serializes");
        Sha256::digest(json.as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}

fn merge(base: &mut toml::Table, over: toml::Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_validate() {
        ExperimentConfig::preset(Scale::Paper).validate().unwrap();
        ExperimentConfig::preset(Scale::Desk).validate().unwrap();
        assert_eq!(
            ExperimentConfig::preset(Scale::Paper)
                .specs(false)
                .unwrap()
                .len(),
            27
        );
    }

    #[test]
    fn file_overrides_preset() {
        let dir = std::env::temp_dir().join(format!("locker-cfg-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("exp.toml");
        std::fs::write(
            &path,
            "scale = \"desk\"\nsettings = [\"1id\", \"2pf\"]\n[training]\ndays = 7\n",
        )
        .unwrap();
        let cfg = ExperimentConfig::load(Some(&path), None, Some(9)).unwrap();
        assert_eq!(cfg.scale, Scale::Desk);
        assert_eq!(cfg.layout, Layout::desk());
        assert_eq!(cfg.training.days, 7);
        assert_eq!(cfg.training.epsilon_days, 144);
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.settings, vec!["1id", "2pf"]);
        let paper = ExperimentConfig::load(Some(&path), Some(Scale::Paper), None).unwrap();
        assert_eq!(paper.layout, Layout::main());
        std::fs::remove_dir_all(dir).unwrap();
    }

    #[test]
    fn unknown_keys_and_bad_names_are_rejected() {
        let dir = std::env::temp_dir().join(format!("locker-bad-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        for (i, text) in [
            "colour = 3\n",
            "settings = [\"4xx\"]\n",
            "policies = [\"V-ER_LD/BU\"]\n",
            "mismatch_controls = [\"FC\"]\n",
        ]
        .iter()
        .enumerate()
        {
            let path = dir.join(format!("{i}.toml"));
            std::fs::write(&path, text).unwrap();
            assert!(
                ExperimentConfig::load(Some(&path), Some(Scale::Desk), None).is_err(),
                "{text}"
            );
        }
        std::fs::remove_dir_all(dir).unwrap();
    }

    #[test]
    fn hash_ignores_output_only() {
        let a = ExperimentConfig::preset(Scale::Desk);
        let mut b = a.clone();
        b.output = PathBuf::from("elsewhere");
        assert_eq!(a.hash(), b.hash());
        b.seed = 2;
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
    }

    #[test]
    fn mismatch_specs_cover_the_grid() {
        let cfg = ExperimentConfig::preset(Scale::Desk);
        let specs = cfg.specs(true).unwrap();
        assert_eq!(specs.len(), 10);
        assert_eq!(specs.iter().filter(|s| s.is_mismatched()).count(), 6);
    }
}
