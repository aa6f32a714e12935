//! TOML configuration for the end-to-end evaluation.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::corpus::Measure;
use crate::error::{Error, Result};
use crate::gam::{BasisSpec, LambdaPolicy};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalConfig {
    pub paths: PathsConfig,
    #[serde(default)]
    pub settings: SettingsConfig,
    #[serde(default)]
    pub gam: BasisSpec,
    #[serde(default, rename = "models")]
    pub models: Vec<ModelEntry>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PathsConfig {
    pub eyetracking: PathBuf,
    pub cloze: PathBuf,
    pub frequency: PathBuf,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct SettingsConfig {
    pub measures: Vec<Measure>,
    pub cloze_alpha: f64,
    /// Restrict PNC to tokens surviving the preprocessing filter.
    pub pnc_retained_only: bool,
    /// "gcv" or "fixed".
    pub lambda_policy: String,
    /// Used when lambda_policy = "fixed".
    pub fixed_lambdas: Vec<f64>,
    /// Model reading times on the log scale instead of raw milliseconds.
    pub log_response: bool,
}

impl Default for SettingsConfig {
    fn default() -> Self {
        SettingsConfig {
            measures: Measure::ALL.to_vec(),
            cloze_alpha: 0.5,
            pnc_retained_only: false,
            lambda_policy: "gcv".to_string(),
            fixed_lambdas: Vec::new(),
            log_response: false,
        }
    }
}

impl SettingsConfig {
    pub fn lambda_policy(&self) -> Result<LambdaPolicy> {
        match self.lambda_policy.as_str() {
            "gcv" => Ok(LambdaPolicy::Gcv),
            "fixed" => Ok(LambdaPolicy::Fixed(self.fixed_lambdas.clone())),
            other => Err(Error::Argument(format!(
                "lambda_policy must be \"gcv\" or \"fixed\", got {other:?}"
            ))),
        }
    }
}

/// One language model to evaluate. `kind` selects the surprisal source
/// implementation from the registry.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelEntry {
    pub id: String,
    pub kind: String,
    /// Path to a surprisal dump (kind = "dump") or a trained model file
    /// (kind = "ngram").
    #[serde(default)]
    pub path: Option<PathBuf>,
    /// Training text for kind = "ngram" when no model file is given.
    #[serde(default)]
    pub train: Option<PathBuf>,
    #[serde(default)]
    pub order: Option<usize>,
    /// Overrides the source's own vocabulary size in the report.
    #[serde(default)]
    pub vocab_size: Option<u64>,
    /// Log base of dump surprisals; "nats" (default) or "bits".
    #[serde(default)]
    pub log_base: Option<String>,
}

impl EvalConfig {
    pub fn load(path: &Path) -> Result<EvalConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut config: EvalConfig = toml::from_str(&text).map_err(|e| Error::Format {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        // paths are relative to the config file
        if let Some(dir) = path.parent() {
            let anchor = |p: &mut PathBuf| {
                if p.is_relative() {
                    *p = dir.join(&p);
                }
            };
            anchor(&mut config.paths.eyetracking);
            anchor(&mut config.paths.cloze);
            anchor(&mut config.paths.frequency);
            for entry in &mut config.models {
                if let Some(p) = &mut entry.path {
                    anchor(p);
                }
                if let Some(p) = &mut entry.train {
                    anchor(p);
                }
            }
        }
        Ok(config)
    }
}
