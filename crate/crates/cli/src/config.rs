//! The experiment configuration file.
//!
//! A run config is one JSON document with five sections; unknown keys are
//! rejected everywhere, and every key has a default. The shipped presets
//! are exactly these defaults (`presets/mild.json`) and the defaults with
//! the hard label-shift data section (`presets/hard.json`).

use cali_core::models::{ArchitectureConfig, OptimizerConfig};
use cali_core::synthdata::{hard_shift_spec, mild_shift_spec, DomainSpec};
use cali_core::trainer::TrainConfig;
use cali_core::{Error, Result};
use cali_nav::navsim::SimConfig;
use cali_nav::planner::PlannerConfig;
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Data-generation section: the domain pair plus sample counts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataSection {
    pub domain: DomainSpec,
    pub n_source: usize,
    pub n_target: usize,
    pub n_target_eval: usize,
}

impl Default for DataSection {
    fn default() -> Self {
        DataSection {
            domain: mild_shift_spec(),
            n_source: 40,
            n_target: 40,
            n_target_eval: 12,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub data: DataSection,
    pub arch: ArchitectureConfig,
    pub optimizer: OptimizerConfig,
    pub train: TrainConfig,
    pub planner: PlannerConfig,
    pub sim: SimConfig,
}

impl RunConfig {
    /// The mild-shift benchmark preset; identical to the defaults.
    pub fn mild_preset() -> Self {
        RunConfig::default()
    }

    /// The hard-shift benchmark preset: defaults with the strong label
    /// shift in the data section.
    pub fn hard_preset() -> Self {
        RunConfig {
            data: DataSection {
                domain: hard_shift_spec(),
                ..DataSection::default()
            },
            ..RunConfig::default()
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config(format!("cannot read config {path:?}: {e}")))?;
        let cfg: RunConfig = serde_json::from_str(&text)
            .map_err(|e| Error::config(format!("config {path:?}: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.data.domain.validate()?;
        if self.data.n_source == 0 || self.data.n_target == 0 || self.data.n_target_eval == 0 {
            return Err(Error::config("sample counts must be positive"));
        }
        if self.arch.classes != self.data.domain.classes {
            return Err(Error::config(format!(
                "arch.classes ({}) must match data.domain.classes ({})",
                self.arch.classes, self.data.domain.classes
            )));
        }
        self.arch.validate()?;
        self.train.validate()?;
        self.planner.validate()?;
        self.sim.validate()?;
        Ok(())
    }

    pub fn to_pretty_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("config serializes");
        s.push('\n');
        s
    }

    /// Every config key with its default value, for `--help`.
    pub fn describe_defaults() -> String {
        let v = serde_json::to_value(RunConfig::default()).expect("config serializes");
        let mut lines = String::from("Config keys and defaults:\n");
        flatten("", &v, &mut lines);
        lines
    }
}

fn flatten(prefix: &str, v: &serde_json::Value, out: &mut String) {
    match v {
        serde_json::Value::Object(map) => {
            for (k, val) in map {
                let path = if prefix.is_empty() {
                    k.clone()
                } else {
                    format!("{prefix}.{k}")
                };
                flatten(&path, val, out);
            }
        }
        other => {
            out.push_str(&format!("  {prefix} = {other}\n"));
        }
    }
}
