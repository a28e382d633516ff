use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::backend::{
    Backend, BackendKind, HttpBackend, HttpConfig, Recording, ReplayBackend, ReplayStore, RetryPolicy,
    ScriptedBackend,
};
use crate::prompt::PromptSettings;

use super::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Pipeline {
    #[serde(rename = "fanta")]
    Fanta,
    #[serde(rename = "fanta-concise")]
    FantaConcise,
    #[serde(rename = "tptc")]
    Tptc,
    #[serde(rename = "zero-shot-bias")]
    ZeroShotBias,
    #[serde(rename = "zero-shot-narrative")]
    ZeroShotNarrative,
    #[serde(rename = "zero-shot-technique")]
    ZeroShotTechnique,
}

impl Pipeline {
    pub const ALL: [Pipeline; 6] = [
        Pipeline::Fanta,
        Pipeline::FantaConcise,
        Pipeline::Tptc,
        Pipeline::ZeroShotBias,
        Pipeline::ZeroShotNarrative,
        Pipeline::ZeroShotTechnique,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Pipeline::Fanta => "fanta",
            Pipeline::FantaConcise => "fanta-concise",
            Pipeline::Tptc => "tptc",
            Pipeline::ZeroShotBias => "zero-shot-bias",
            Pipeline::ZeroShotNarrative => "zero-shot-narrative",
            Pipeline::ZeroShotTechnique => "zero-shot-technique",
        }
    }
}

impl fmt::Display for Pipeline {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Pipeline {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Pipeline::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| format!("unknown pipeline `{s}`"))
    }
}

fn default_max_attempts() -> u32 {
    5
}

fn default_timeout() -> u64 {
    120
}

fn default_in_flight() -> usize {
    4
}

fn default_model() -> String {
    "gpt-4o-mini".to_string()
}

fn default_max_output() -> u32 {
    crate::backend::DEFAULT_MAX_OUTPUT
}

/// Flat run configuration. Relative paths resolve against the config file's
/// directory. The API key itself never appears here, only the name of the
/// environment variable holding it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub backend: BackendKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub endpoint: Option<String>,
    #[serde(default = "default_model")]
    pub model: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub api_key_env: Option<String>,
    #[serde(default)]
    pub temperature: f64,
    #[serde(default = "default_max_output")]
    pub max_output: u32,
    #[serde(default = "default_in_flight")]
    pub max_in_flight: usize,
    #[serde(default = "default_max_attempts")]
    pub max_attempts: u32,
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
    /// Replay store directory: read by `replay`, written by `http` and
    /// `scripted`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cache_dir: Option<PathBuf>,
    /// Response script for the `scripted` backend.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub script: Option<PathBuf>,
    pub pipeline: Pipeline,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub corpus: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub taxonomy: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub catalog: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    /// Keep raw completions on every prediction line.
    #[serde(default)]
    pub audit: bool,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let mut cfg: RunConfig =
            toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [
            &mut cfg.cache_dir,
            &mut cfg.script,
            &mut cfg.corpus,
            &mut cfg.taxonomy,
            &mut cfg.catalog,
            &mut cfg.output,
        ]
        .into_iter()
        .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: &str| Err(CliError::Config(m.to_string()));
        if !(self.temperature >= 0.0) {
            return bad("temperature must be >= 0");
        }
        if self.max_in_flight == 0 {
            return bad("max_in_flight must be >= 1");
        }
        if self.max_attempts == 0 {
            return bad("max_attempts must be >= 1");
        }
        if self.corpus.is_none() {
            return bad("no corpus given (config `corpus` or --corpus)");
        }
        if self.output.is_none() {
            return bad("no output directory given (config `output` or --out)");
        }
        match self.backend {
            BackendKind::Http => {
                if self.endpoint.as_deref().is_none_or(|e| e.trim().is_empty()) {
                    return bad("http backend requires `endpoint`");
                }
                if self.api_key_env.as_deref().is_none_or(|e| e.trim().is_empty()) {
                    return bad("http backend requires `api_key_env`");
                }
            }
            BackendKind::Replay => {
                if self.cache_dir.is_none() {
                    return bad("replay backend requires `cache_dir`");
                }
            }
            BackendKind::Scripted => {
                if self.script.is_none() {
                    return bad("scripted backend requires `script`");
                }
            }
        }
        Ok(())
    }

    pub fn settings(&self) -> PromptSettings {
        PromptSettings {
            model: self.model.clone(),
            temperature: self.temperature,
            max_output: self.max_output,
        }
    }

    /// SHA-256 of the effective configuration as canonical JSON. The output
    /// directory is left out since it does not affect results.
    pub fn digest(&self) -> String {
        let mut cfg = self.clone();
        cfg.output = None;
        let value = serde_json::to_value(&cfg).expect("config serializes");
        sha256_hex(serde_json::to_string(&value).expect("json").as_bytes())
    }

    /// Builds the configured backend. Every check that can fail happens here,
    /// before any request is issued.
    pub fn build_backend(&self) -> Result<Box<dyn Backend>, CliError> {
        self.validate()?;
        let backend: Box<dyn Backend> = match self.backend {
            BackendKind::Http => {
                let var = self.api_key_env.as_deref().unwrap_or_default();
                let key = std::env::var(var)
                    .map_err(|_| CliError::Config(format!("environment variable {var} is not set")))?;
                let mut http = HttpConfig::new(self.endpoint.clone().unwrap_or_default(), key);
                http.timeout = Duration::from_secs(self.timeout_secs);
                http.retry = RetryPolicy {
                    max_attempts: self.max_attempts,
                    ..RetryPolicy::default()
                };
                let client = HttpBackend::new(http)?;
                match &self.cache_dir {
                    Some(dir) => Box::new(Recording::new(client, ReplayStore::open(dir)?)),
                    None => Box::new(client),
                }
            }
            BackendKind::Replay => {
                let dir = self.cache_dir.as_ref().expect("validated");
                Box::new(ReplayBackend::new(ReplayStore::existing(dir)?))
            }
            BackendKind::Scripted => {
                let script = ScriptedBackend::load(self.script.as_ref().expect("validated"))?;
                match &self.cache_dir {
                    Some(dir) => Box::new(Recording::new(script, ReplayStore::open(dir)?)),
                    None => Box::new(script),
                }
            }
        };
        Ok(backend)
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}
