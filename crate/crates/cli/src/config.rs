use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use codeagent::agents::BackendConfig;
use codeagent::github::ClientConfig;
use codeagent::qa::QaSettings;
use serde::Deserialize;

/// Contents of the `--config` file. Every section is optional.
#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AppConfig {
    pub backend: Option<BackendConfig>,
    pub qa: QaSettings,
    pub plan: PlanOverrides,
    pub github: ClientConfig,
    pub paths: Paths,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlanOverrides {
    pub max_rounds: Option<u32>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub dataset: Option<PathBuf>,
    pub fixtures: Option<PathBuf>,
    /// Default directory for `--out` when the flag is omitted.
    pub output_dir: Option<PathBuf>,
}

impl AppConfig {
    pub fn load(path: Option<&Path>) -> anyhow::Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let cfg: AppConfig =
            serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        cfg.check_paths()?;
        Ok(cfg)
    }

    fn check_paths(&self) -> anyhow::Result<()> {
        for (name, p) in [("dataset", &self.paths.dataset), ("fixtures", &self.paths.fixtures)] {
            if let Some(p) = p {
                if !p.exists() {
                    bail!("configured {name} path {} does not exist", p.display());
                }
            }
        }
        if let Some(dir) = &self.paths.output_dir {
            fs::create_dir_all(dir).with_context(|| format!("creating output directory {}", dir.display()))?;
        }
        Ok(())
    }

    /// `--out` if given, otherwise `default_name` inside the configured output directory.
    pub fn out_path(&self, flag: Option<PathBuf>, default_name: &str) -> anyhow::Result<PathBuf> {
        match (flag, &self.paths.output_dir) {
            (Some(p), _) => Ok(p),
            (None, Some(dir)) => Ok(dir.join(default_name)),
            (None, None) => bail!("--out is required (no paths.output_dir configured)"),
        }
    }
}
