use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::analogy::AnalogyConfig;
use crate::fraction::Fraction;
use crate::gateway::{BackendConfig, GENERATION_TEMPERATURE, INFERENCE_TEMPERATURE};
use crate::program::{Isolation, SandboxPolicy};
use crate::selection::RefineConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum RunMode {
    Cot,
    Program,
    Selection,
    #[default]
    Refine,
}

impl RunMode {
    pub fn label(self) -> &'static str {
        match self {
            RunMode::Cot => "cot",
            RunMode::Program => "program",
            RunMode::Selection => "selection",
            RunMode::Refine => "refine",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IsolationMode {
    InProcess,
    #[default]
    Subprocess,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub mode: RunMode,
    pub k_samples: u32,
    pub agreement_threshold: Fraction,
    pub inference_temperature: f64,
    pub generation_temperature: f64,
    pub top_t: usize,
    pub max_cases: usize,
    pub entities_per_parameter: usize,
    pub statements_per_entity: usize,
    pub similar_target: usize,
    pub similar_minimum: usize,
    pub timeout_secs: u64,
    pub max_llm_calls: u32,
    pub isolation: IsolationMode,
    /// Questions answered concurrently; 0 uses one per core.
    pub workers: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            mode: RunMode::default(),
            k_samples: 10,
            agreement_threshold: Fraction::new(8, 10),
            inference_temperature: INFERENCE_TEMPERATURE,
            generation_temperature: GENERATION_TEMPERATURE,
            top_t: 2,
            max_cases: 2,
            entities_per_parameter: 6,
            statements_per_entity: 5,
            similar_target: 10,
            similar_minimum: 4,
            timeout_secs: 120,
            max_llm_calls: 200,
            isolation: IsolationMode::default(),
            workers: 0,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("invalid configuration: {0}")]
    Parse(String),
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let t = self.agreement_threshold;
        if self.k_samples < 1 {
            return Err(ConfigError::Invalid("k_samples must be at least 1".into()));
        }
        if t.den == 0 || t.num == 0 || t.num > t.den {
            return Err(ConfigError::Invalid(format!("agreement_threshold {t} is not in (0, 1]")));
        }
        for (name, x) in [
            ("inference_temperature", self.inference_temperature),
            ("generation_temperature", self.generation_temperature),
        ] {
            if !(0.0..=2.0).contains(&x) {
                return Err(ConfigError::Invalid(format!("{name} {x} is outside [0, 2]")));
            }
        }
        Ok(())
    }

    pub fn analogy(&self) -> AnalogyConfig {
        AnalogyConfig {
            entities_per_parameter: self.entities_per_parameter,
            statements_per_entity: self.statements_per_entity,
            target: self.similar_target,
            minimum: self.similar_minimum,
            k: self.k_samples,
            threshold: self.agreement_threshold,
            inference_temperature: self.inference_temperature,
            generation_temperature: self.generation_temperature,
        }
    }

    pub fn refine(&self) -> RefineConfig {
        RefineConfig {
            top_t: self.top_t,
            max_cases: self.max_cases,
        }
    }

    /// Sandbox policy; subprocess isolation needs the worker executable.
    pub fn policy(&self, worker: Option<&Path>) -> SandboxPolicy {
        let isolation = match (self.isolation, worker) {
            (IsolationMode::Subprocess, Some(exe)) => Isolation::worker(exe),
            (IsolationMode::Subprocess, None) => {
                tracing::warn!("no sandbox worker executable; running programs in process");
                Isolation::InProcess
            }
            (IsolationMode::InProcess, _) => Isolation::InProcess,
        };
        SandboxPolicy {
            timeout: Duration::from_secs(self.timeout_secs),
            max_llm_calls: self.max_llm_calls,
            isolation,
            ..SandboxPolicy::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    #[serde(default)]
    pub backend: BackendConfig,
    /// Separate model for conceptualization; defaults to `backend`.
    #[serde(default)]
    pub conceptualizer: Option<BackendConfig>,
    #[serde(default)]
    pub run: RunConfig,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let cfg: ConfigFile = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        cfg.run.validate()?;
        Ok(cfg)
    }

    /// Reads a TOML file; relative cache paths resolve against its directory.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut cfg = ConfigFile::parse(&text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        for b in std::iter::once(&mut cfg.backend).chain(cfg.conceptualizer.as_mut()) {
            if let Some(c) = b.cache.as_mut().filter(|c| c.is_relative()) {
                *c = base.join(&*c);
            }
        }
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::Mode;

    #[test]
    fn full_file() {
        let cfg = ConfigFile::parse(
            r#"
[backend]
mode = "record"
model = "llama-70b-instruct"
endpoint = "http://localhost:8000/v1"
api_key_env = "CONCEPT_API_KEY"
cache = "cache.jsonl"

[conceptualizer]
mode = "replay"
model = "gpt-4"

[run]
mode = "selection"
k_samples = 10
agreement_threshold = "10/10"
isolation = "in_process"
"#,
        )
        .unwrap();
        assert_eq!(cfg.backend.mode, Mode::Record);
        assert_eq!(cfg.conceptualizer.unwrap().model, "gpt-4");
        assert_eq!(cfg.run.mode, RunMode::Selection);
        assert_eq!(cfg.run.agreement_threshold, Fraction::new(10, 10));
        assert_eq!(cfg.run.top_t, 2);
        assert_eq!(cfg.run.policy(None).isolation, Isolation::InProcess);
    }

    #[test]
    fn rejects_bad_values() {
        assert!(ConfigFile::parse("[run]\nk_samples = 0\n").is_err());
        assert!(ConfigFile::parse("[run]\nagreement_threshold = \"11/10\"\n").is_err());
        assert!(ConfigFile::parse("[run]\nunknown_key = 1\n").is_err());
        assert_eq!(ConfigFile::parse("").unwrap().run, RunConfig::default());
    }
}
