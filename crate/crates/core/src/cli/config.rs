//! The run configuration file. Every key is optional; a value set here
//! sits below command-line flags and `TURNPILOT_*` environment variables
//! and above the built-in defaults.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    #[serde(default)]
    pub providers: ProvidersConfig,
    #[serde(default)]
    pub corpus: CorpusConfig,
    #[serde(default)]
    pub analysis: AnalysisConfig,
    #[serde(default)]
    pub classifier: ClassifierConfig,
    #[serde(default)]
    pub simulator: SimulatorConfig,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProvidersConfig {
    /// `mock` or `remote`.
    pub chat: Option<String>,
    pub chat_endpoint: Option<String>,
    pub chat_model: Option<String>,
    pub recorded: Option<PathBuf>,
    pub temperature: Option<f64>,
    pub max_tokens: Option<u32>,
    /// `deterministic` or `remote`.
    pub embedder: Option<String>,
    pub embed_endpoint: Option<String>,
    pub embed_model: Option<String>,
    pub cache_dir: Option<PathBuf>,
    pub parallelism: Option<usize>,
    /// Requests per second against remote providers.
    pub rate_limit: Option<f64>,
    pub failure_ceiling: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusConfig {
    pub path: Option<PathBuf>,
    pub limit: Option<usize>,
    pub filter_before_limit: Option<bool>,
    pub levels: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisConfig {
    pub gold_percentile: Option<f64>,
    pub theta: Option<f64>,
    pub score_all: Option<bool>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassifierConfig {
    pub learning_rate: Option<f64>,
    pub l2: Option<f64>,
    pub epochs: Option<usize>,
    pub batch_size: Option<usize>,
    pub split: Option<f64>,
    pub include_full: Option<bool>,
    pub cutoff: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulatorConfig {
    pub profile: Option<String>,
    pub response_tokens: Option<u32>,
    pub filler_latency_ms: Option<f64>,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, String> {
        toml::from_str(text).map_err(|e| e.to_string())
    }

    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        Self::parse(&text).map_err(|e| format!("{}: {e}", path.display()))
    }
}

/// Flag (clap already folds in the environment variable), then file, then
/// default.
pub fn pick<T>(flag: Option<T>, file: Option<T>, default: T) -> T {
    flag.or(file).unwrap_or(default)
}
