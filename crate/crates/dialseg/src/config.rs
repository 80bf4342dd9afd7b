//! Run configuration: a TOML file with per-command sections, environment
//! variable interpolation for secrets, and CLI overrides applied on top.
//!
//! `${NAME}` in the file expands from the environment before parsing; a
//! missing variable is an error so secrets cannot silently vanish. Credentials
//! themselves never live in the file: the `[llm]` section only names the
//! environment variable that holds the bearer token.

use std::path::Path;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use dialseg_core::coherence::DecodeParams;
use dialseg_core::fusion::{FusionParams, TableMode};
use dialseg_core::metrics::{EvalConfig, UnlabeledMode};
use dialseg_core::synth::SynthSpec;

use crate::llm::LlmClientConfig;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Toml {
        path: String,
        source: toml::de::Error,
    },
    #[error("environment variable `{0}` referenced in config is not set")]
    MissingEnvVar(String),
    #[error("invalid config value: {0}")]
    Invalid(String),
}

/// Raw file shape; every field optional so partial configs compose with
/// defaults and CLI flags.
#[derive(Debug, Default, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub format_version: Option<String>,
    pub seed: Option<u64>,
    pub jobs: Option<usize>,
    #[serde(default)]
    pub decode: DecodeSection,
    #[serde(default)]
    pub fusion: FusionSection,
    #[serde(default)]
    pub llm: LlmSection,
    #[serde(default)]
    pub metrics: MetricsSection,
    #[serde(default)]
    pub synth: SynthSection,
}

#[derive(Debug, Default, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecodeSection {
    pub window_size: Option<usize>,
    pub alpha: Option<f64>,
    pub pick_num: Option<usize>,
    pub avg_seg_len: Option<usize>,
    pub min_gap: Option<usize>,
    pub smoothing: Option<usize>,
}

#[derive(Debug, Default, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FusionSection {
    pub k_ret: Option<usize>,
    pub tau: Option<f64>,
    pub alpha_fuse: Option<f64>,
    pub seed: Option<u64>,
    pub exclude_self: Option<bool>,
    /// "centroid" or "random".
    pub table_mode: Option<String>,
    /// Rater whose labels build the memory bank.
    pub memory_rater: Option<String>,
}

#[derive(Debug, Default, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LlmSection {
    pub endpoint: Option<String>,
    pub model: Option<String>,
    pub timeout_secs: Option<u64>,
    pub max_retries: Option<u32>,
    pub concurrency: Option<usize>,
    pub temperature: Option<f64>,
    pub max_tokens: Option<u32>,
    pub api_key_env: Option<String>,
    pub strict_parse: Option<bool>,
    pub include_speakers: Option<bool>,
}

#[derive(Debug, Default, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricsSection {
    /// "none-category" (default) or "exclude".
    pub unlabeled: Option<String>,
    pub normalize_adjacent: Option<bool>,
    pub bootstrap_iterations: Option<usize>,
    pub confidence_level: Option<f64>,
}

#[derive(Debug, Default, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSection {
    pub sessions: Option<usize>,
    pub t_min: Option<usize>,
    pub t_max: Option<usize>,
    pub k_min: Option<usize>,
    pub k_max: Option<usize>,
    pub moves: Option<usize>,
    pub dim: Option<usize>,
    pub separation: Option<f64>,
    pub rater_noise: Option<f64>,
    pub unlabeled_rate: Option<f64>,
    pub min_seg_len: Option<usize>,
    pub seed: Option<u64>,
}

/// Expand `${NAME}` references from the environment.
pub fn expand_env(text: &str) -> Result<String, ConfigError> {
    let mut out = String::with_capacity(text.len());
    let mut rest = text;
    while let Some(start) = rest.find("${") {
        out.push_str(&rest[..start]);
        let after = &rest[start + 2..];
        let Some(end) = after.find('}') else {
            out.push_str(&rest[start..]);
            return Ok(out);
        };
        let name = &after[..end];
        let value =
            std::env::var(name).map_err(|_| ConfigError::MissingEnvVar(name.to_string()))?;
        out.push_str(&value);
        rest = &after[end + 1..];
    }
    out.push_str(rest);
    Ok(out)
}

pub fn load_file_config(path: Option<&Path>) -> Result<FileConfig, ConfigError> {
    let Some(path) = path else {
        return Ok(FileConfig::default());
    };
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let expanded = expand_env(&text)?;
    toml::from_str(&expanded).map_err(|source| ConfigError::Toml {
        path: path.display().to_string(),
        source,
    })
}

impl FileConfig {
    pub fn decode_params(&self) -> DecodeParams {
        let d = &self.decode;
        let defaults = DecodeParams::default();
        DecodeParams {
            window_size: d.window_size.unwrap_or(defaults.window_size),
            alpha: d.alpha.unwrap_or(defaults.alpha),
            pick_num: d.pick_num.or(defaults.pick_num),
            avg_seg_len: d.avg_seg_len.or(defaults.avg_seg_len),
            min_gap: d.min_gap.unwrap_or(defaults.min_gap),
            smoothing: d.smoothing.or(defaults.smoothing),
        }
    }

    pub fn fusion_params(&self) -> Result<FusionParams, ConfigError> {
        let f = &self.fusion;
        let defaults = FusionParams::default();
        let table_mode = match f.table_mode.as_deref() {
            None => defaults.table_mode,
            Some("centroid") => TableMode::Centroid,
            Some("random") => TableMode::Random,
            Some(other) => {
                return Err(ConfigError::Invalid(format!(
                    "fusion.table_mode must be `centroid` or `random`, got `{other}`"
                )))
            }
        };
        Ok(FusionParams {
            k_ret: f.k_ret.unwrap_or(defaults.k_ret),
            tau: f.tau.unwrap_or(defaults.tau),
            alpha_fuse: f.alpha_fuse.unwrap_or(defaults.alpha_fuse),
            seed: f.seed.or(self.seed).unwrap_or(defaults.seed),
            exclude_self: f.exclude_self.unwrap_or(defaults.exclude_self),
            table_mode,
        })
    }

    pub fn llm_config(&self) -> LlmClientConfig {
        let l = &self.llm;
        let defaults = LlmClientConfig::default();
        LlmClientConfig {
            endpoint: l.endpoint.clone().unwrap_or(defaults.endpoint),
            model: l.model.clone().unwrap_or(defaults.model),
            timeout: l
                .timeout_secs
                .map(Duration::from_secs)
                .unwrap_or(defaults.timeout),
            max_retries: l.max_retries.unwrap_or(defaults.max_retries),
            concurrency: l.concurrency.unwrap_or(defaults.concurrency),
            temperature: l.temperature.unwrap_or(defaults.temperature),
            max_tokens: l.max_tokens.unwrap_or(defaults.max_tokens),
            api_key_env: l.api_key_env.clone().unwrap_or(defaults.api_key_env),
            strict_parse: l.strict_parse.unwrap_or(defaults.strict_parse),
            include_speakers: l.include_speakers.unwrap_or(defaults.include_speakers),
        }
    }

    pub fn eval_config(&self) -> Result<EvalConfig, ConfigError> {
        let m = &self.metrics;
        let defaults = EvalConfig::default();
        let unlabeled = match m.unlabeled.as_deref() {
            None | Some("none-category") => UnlabeledMode::NoneCategory,
            Some("exclude") => UnlabeledMode::Exclude,
            Some(other) => {
                return Err(ConfigError::Invalid(format!(
                    "metrics.unlabeled must be `none-category` or `exclude`, got `{other}`"
                )))
            }
        };
        Ok(EvalConfig {
            unlabeled,
            normalize_adjacent: m.normalize_adjacent.unwrap_or(defaults.normalize_adjacent),
            bootstrap_iterations: m
                .bootstrap_iterations
                .unwrap_or(defaults.bootstrap_iterations),
            confidence_level: m.confidence_level.unwrap_or(defaults.confidence_level),
            seed: self.seed.unwrap_or(defaults.seed),
        })
    }

    pub fn synth_spec(&self) -> SynthSpec {
        let s = &self.synth;
        let defaults = SynthSpec::default();
        SynthSpec {
            sessions: s.sessions.unwrap_or(defaults.sessions),
            t_range: (
                s.t_min.unwrap_or(defaults.t_range.0),
                s.t_max.unwrap_or(defaults.t_range.1),
            ),
            k_range: (
                s.k_min.unwrap_or(defaults.k_range.0),
                s.k_max.unwrap_or(defaults.k_range.1),
            ),
            moves: s.moves.unwrap_or(defaults.moves),
            dim: s.dim.unwrap_or(defaults.dim),
            separation: s.separation.unwrap_or(defaults.separation),
            rater_noise: s.rater_noise.unwrap_or(defaults.rater_noise),
            unlabeled_rate: s.unlabeled_rate.unwrap_or(defaults.unlabeled_rate),
            min_seg_len: s.min_seg_len.unwrap_or(defaults.min_seg_len),
            seed: s.seed.or(self.seed).unwrap_or(defaults.seed),
        }
    }
}
