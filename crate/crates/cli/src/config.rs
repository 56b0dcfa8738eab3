//! Run configuration file: TOML with one table per subcommand. Every key
//! mirrors a command-line flag of the same name (dashes become
//! underscores); flags win over the file.

use std::path::{Path, PathBuf};

use anyhow::Context;
use mnar_fusion::simulation::Setting;
use serde::Deserialize;

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub out_dir: Option<PathBuf>,
    pub workers: Option<usize>,
    pub simulate: SimulateConfig,
    pub estimate: EstimateConfig,
    pub replicate: ReplicateConfig,
    pub oracle_check: OracleConfig,
    pub ingest: IngestConfig,
    pub fixture: FixtureConfig,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateConfig {
    pub model: Option<u8>,
    pub setting: Option<Setting>,
    pub n: Option<usize>,
    pub seed: Option<u64>,
    pub prefix: Option<String>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimateConfig {
    pub data: Option<PathBuf>,
    pub model: Option<String>,
    pub schema_map: Option<PathBuf>,
    pub missing_token: Option<String>,
    pub bootstrap: Option<usize>,
    pub bootstrap_seed: Option<u64>,
    pub ci_level: Option<f64>,
    pub unstratified: bool,
    pub propensity_basis: Option<String>,
    pub h_basis: Option<String>,
    pub aux_basis: Option<String>,
    pub outcome_basis: Option<String>,
    pub baseline_basis: Option<String>,
    pub or_x_interaction: bool,
    pub fixed_gamma: Option<f64>,
    pub report: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReplicateConfig {
    pub model: Option<u8>,
    pub setting: Option<Vec<Setting>>,
    pub n: Option<Vec<usize>>,
    pub reps: Option<usize>,
    pub seed: Option<u64>,
    pub estimators: Option<Vec<String>>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleConfig {
    pub laws: Option<usize>,
    pub seed: Option<u64>,
    pub law: Vec<PathBuf>,
    pub law_model: Option<u8>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IngestConfig {
    pub data: Option<PathBuf>,
    pub schema_map: Option<PathBuf>,
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FixtureConfig {
    pub n_primary: Option<usize>,
    pub n_auxiliary: Option<usize>,
    pub seed: Option<u64>,
}

impl RunConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }
}
