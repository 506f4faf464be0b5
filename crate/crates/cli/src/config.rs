//! TOML run configuration. Every field is optional; missing values fall back
//! to the [`PipelineConfig`] defaults.

use avatarforge_core::backends::{BackendSuite, HttpConfig};
use avatarforge_core::pipeline::{BackgroundMode, PipelineConfig, PromptSpec};
use avatarforge_core::Execution;
use serde::Deserialize;
use std::path::{Path, PathBuf};
use std::time::Duration;

use crate::CliError;

pub const ENDPOINT_ENV: &str = "AVATARFORGE_ENDPOINT";

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    #[serde(default)]
    pub pipeline: PipelineSection,
    #[serde(default)]
    pub prompt: Option<PromptSection>,
    #[serde(default)]
    pub backend: BackendSection,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineSection {
    pub guidance_scale: Option<f64>,
    pub steps: Option<u32>,
    pub fps: Option<f64>,
    pub width: Option<usize>,
    pub height: Option<usize>,
    pub feather_width: Option<usize>,
    pub seed: Option<u64>,
    pub negative_prompt: Option<String>,
    pub background_mode: Option<BackgroundModeName>,
    pub adapter_job_dir: Option<PathBuf>,
    pub execution: Option<ExecutionName>,
}

#[derive(Clone, Copy, Debug, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum BackgroundModeName {
    Harmonic,
    Inpainter,
}

#[derive(Clone, Copy, Debug, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum ExecutionName {
    Sequential,
    Parallel,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PromptSection {
    pub clothes: String,
    pub face: String,
    pub background: String,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BackendSection {
    #[serde(default)]
    pub kind: BackendKind,
    pub endpoint: Option<String>,
    pub timeout_secs: Option<u64>,
    pub retries: Option<u32>,
    pub max_in_flight: Option<usize>,
    /// Route the prompt templates through the remote refiner.
    #[serde(default = "default_true")]
    pub refine: bool,
}

impl Default for BackendSection {
    fn default() -> Self {
        BackendSection {
            kind: BackendKind::default(),
            endpoint: None,
            timeout_secs: None,
            retries: None,
            max_in_flight: None,
            refine: true,
        }
    }
}

fn default_true() -> bool {
    true
}

#[derive(Clone, Copy, Debug, Default, Deserialize, PartialEq, Eq, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    #[default]
    Mock,
    Http,
}

/// Values given on the command line, which win over the file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub backend: Option<BackendKind>,
    pub endpoint: Option<String>,
    pub seed: Option<u64>,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<FileConfig, CliError> {
        let Some(path) = path else {
            return Ok(FileConfig::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        FileConfig::parse(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
    }

    pub fn parse(text: &str) -> Result<FileConfig, String> {
        toml::from_str(text).map_err(|e| e.to_string())
    }

    pub fn prompt_spec(&self) -> Result<Option<PromptSpec>, CliError> {
        self.prompt
            .as_ref()
            .map(|p| {
                PromptSpec::new(&p.clothes, &p.face, &p.background)
                    .map_err(|e| CliError::Input(e.to_string()))
            })
            .transpose()
    }

    /// Builds the backend suite. Endpoint precedence: flag, then the
    /// environment, then the file.
    pub fn backends(&self, over: &Overrides) -> Result<BackendSuite, CliError> {
        self.backends_with_env(over, std::env::var(ENDPOINT_ENV).ok())
    }

    pub fn backends_with_env(
        &self,
        over: &Overrides,
        env_endpoint: Option<String>,
    ) -> Result<BackendSuite, CliError> {
        let b = &self.backend;
        match over.backend.unwrap_or(b.kind) {
            BackendKind::Mock => Ok(BackendSuite::mock()),
            BackendKind::Http => {
                let endpoint = over
                    .endpoint
                    .clone()
                    .or(env_endpoint.filter(|e| !e.is_empty()))
                    .or_else(|| b.endpoint.clone())
                    .ok_or_else(|| {
                        CliError::Usage(format!(
                            "http backend needs --endpoint, {ENDPOINT_ENV} or [backend].endpoint"
                        ))
                    })?;
                let mut http = HttpConfig::new(endpoint);
                if let Some(s) = b.timeout_secs {
                    http.timeout = Duration::from_secs(s);
                }
                if let Some(r) = b.retries {
                    http.retries = r;
                }
                if let Some(m) = b.max_in_flight {
                    if m == 0 {
                        return Err(CliError::Input("[backend].max_in_flight must be at least 1".into()));
                    }
                    http.max_in_flight = m;
                }
                let mut suite = BackendSuite::http(http);
                if !b.refine {
                    suite.llm_refiner = None;
                }
                Ok(suite)
            }
        }
    }

    pub fn pipeline(&self, backends: BackendSuite, over: &Overrides) -> Result<PipelineConfig, CliError> {
        let p = &self.pipeline;
        let mut c = PipelineConfig::new(backends);
        if let Some(v) = p.guidance_scale {
            c.guidance_scale = v;
        }
        if let Some(v) = p.steps {
            c.steps = v;
        }
        if let Some(v) = p.fps {
            c.fps = v;
        }
        if let Some(v) = p.width {
            c.width = v;
        }
        if let Some(v) = p.height {
            c.height = v;
        }
        if let Some(v) = p.feather_width {
            c.feather_width = v;
        }
        if let Some(v) = over.seed.or(p.seed) {
            c.seed = v;
        }
        if let Some(v) = &p.negative_prompt {
            c.negative_prompt = v.clone();
        }
        if let Some(v) = p.background_mode {
            c.background_mode = match v {
                BackgroundModeName::Harmonic => BackgroundMode::Harmonic,
                BackgroundModeName::Inpainter => BackgroundMode::Inpainter,
            };
        }
        if let Some(v) = &p.adapter_job_dir {
            c.adapter_job_dir = v.clone();
        }
        if let Some(v) = p.execution {
            c.exec = match v {
                ExecutionName::Sequential => Execution::Sequential,
                ExecutionName::Parallel => Execution::Parallel,
            };
        }
        c.validate().map_err(|e| CliError::Input(e.to_string()))?;
        Ok(c)
    }
}
