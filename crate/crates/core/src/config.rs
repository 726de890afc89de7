//! Pipeline configuration: one TOML document with a section per stage.
//! Every field has a default, so an empty file is a valid config, and any
//! value can be overridden with a dotted `section.key=value` string.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::llm::{HttpConfig, ReasoningEffort};
use crate::orchestrator::OrchestratorConfig;
use crate::prompt::{CategoryConfig, RepairBudget};
use crate::runner::SubprocessConfig;
use crate::surface::SamplingRanges;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid config: {0}")]
    Parse(String),
    #[error("bad override {0:?}: expected section.key=value")]
    Override(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct SurfaceSection {
    pub ranges: SamplingRanges,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct PromptSection {
    pub category: CategoryConfig,
    pub budget: RepairBudget,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GatewaySection {
    pub model_id: String,
    pub reasoning_effort: ReasoningEffort,
    pub max_output_tokens: u32,
    pub system_text: String,
    pub max_in_flight: usize,
    pub http: HttpConfig,
}

impl Default for GatewaySection {
    fn default() -> Self {
        let o = OrchestratorConfig::default();
        GatewaySection {
            model_id: o.model_id,
            reasoning_effort: o.reasoning_effort,
            max_output_tokens: o.max_output_tokens,
            system_text: o.system_text,
            max_in_flight: 8,
            http: HttpConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OrchestratorSection {
    pub max_iterations: usize,
    pub timeout_s: f64,
    pub want_kernel_check: bool,
    pub parallelism: usize,
}

impl Default for OrchestratorSection {
    fn default() -> Self {
        let o = OrchestratorConfig::default();
        OrchestratorSection {
            max_iterations: o.max_iterations,
            timeout_s: o.timeout_s,
            want_kernel_check: o.want_kernel_check,
            parallelism: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReporterSection {
    pub runs_dir: PathBuf,
}

impl Default for ReporterSection {
    fn default() -> Self {
        ReporterSection {
            runs_dir: PathBuf::from("runs"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub surface_catalog: SurfaceSection,
    pub prompt_engine: PromptSection,
    pub llm_gateway: GatewaySection,
    pub generation_orchestrator: OrchestratorSection,
    pub cad_runner: SubprocessConfig,
    pub dataset_reporter: ReporterSection,
}

/// Reads the right-hand side of an override as a TOML value, falling back
/// to a bare string (so `model_id=o3` works without quotes).
fn override_value(raw: &str) -> toml::Value {
    let probe = format!("v = {raw}");
    match toml::from_str::<toml::Table>(&probe) {
        Ok(mut t) => t.remove("v").expect("key present"),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}

fn set_path(table: &mut toml::Table, path: &[&str], value: toml::Value) {
    let (last, parents) = path.split_last().expect("non-empty path");
    let mut cur = table;
    for key in parents {
        let entry = cur
            .entry(key.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        if !entry.is_table() {
            *entry = toml::Value::Table(toml::Table::new());
        }
        cur = entry.as_table_mut().expect("just made a table");
    }
    cur.insert(last.to_string(), value);
}

impl PipelineConfig {
    /// Parses `text` and applies `overrides` on top, in order.
    pub fn from_toml(text: &str, overrides: &[String]) -> Result<Self, ConfigError> {
        let mut table: toml::Table = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        for o in overrides {
            let (key, value) = o.split_once('=').ok_or_else(|| ConfigError::Override(o.clone()))?;
            let path: Vec<&str> = key.trim().split('.').collect();
            if path.len() < 2 || path.iter().any(|p| p.is_empty()) {
                return Err(ConfigError::Override(o.clone()));
            }
            set_path(&mut table, &path, override_value(value.trim()));
        }
        toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| ConfigError::Parse(e.to_string()))
    }

    /// Loads a config file; `None` means all defaults.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self, ConfigError> {
        let text = match path {
            Some(p) => std::fs::read_to_string(p).map_err(|source| ConfigError::Io {
                path: p.to_path_buf(),
                source,
            })?,
            None => String::new(),
        };
        Self::from_toml(&text, overrides)
    }

    /// Effective config as TOML, for run snapshots.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn orchestrator_config(&self, work_root: PathBuf) -> OrchestratorConfig {
        let g = &self.llm_gateway;
        let o = &self.generation_orchestrator;
        OrchestratorConfig {
            max_iterations: o.max_iterations,
            timeout_s: o.timeout_s,
            want_kernel_check: o.want_kernel_check,
            model_id: g.model_id.clone(),
            reasoning_effort: g.reasoning_effort,
            max_output_tokens: g.max_output_tokens,
            system_text: g.system_text.clone(),
            category: self.prompt_engine.category.clone(),
            budget: self.prompt_engine.budget,
            work_root,
        }
    }
}
