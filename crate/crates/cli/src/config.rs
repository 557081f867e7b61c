//! Optional TOML configuration. Command-line flags take precedence over file
//! values, and `MTLR_TIMEOUT_FACTOR` over both.

use std::path::Path;

use anyhow::{Context, Result};
use serde::Deserialize;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    #[serde(default)]
    pub error_bound: ErrorBoundSection,
    #[serde(default)]
    pub campaign: CampaignSection,
    #[serde(default)]
    pub generator: GeneratorSection,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ErrorBoundSection {
    pub safety_factor: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CampaignSection {
    pub seed: Option<u64>,
    pub datasets: Option<usize>,
    pub mrs: Option<String>,
    pub faults: Option<String>,
    #[serde(default)]
    pub sut: Vec<String>,
    pub workers: Option<usize>,
    pub probes: Option<usize>,
    pub timeout_factor: Option<f64>,
    pub constrained: Option<bool>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorSection {
    pub d_min: Option<usize>,
    pub d_max: Option<usize>,
    pub n_min: Option<usize>,
    pub n_max: Option<usize>,
    pub value_bound: Option<f64>,
    pub snr: Option<f64>,
    pub x_snr: Option<f64>,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else { return Ok(Self::default()) };
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }
}
