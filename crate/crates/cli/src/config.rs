//! TOML configuration. Offline mode needs no chat section; the API key is
//! only ever named by its environment variable.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use biasaudit::orchestrator::ChatConfig;
use serde::Deserialize;

/// Environment variable naming a config file when `--config` is absent.
pub const CONFIG_ENV: &str = "BIASAUDIT_CONFIG";

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    #[default]
    Offline,
    Chat,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(default)]
    pub mode: Mode,
    pub chat: Option<ChatConfig>,
    pub thresholds: Option<PathBuf>,
    pub library: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
}

impl Config {
    pub fn parse(text: &str) -> Result<Config> {
        let config: Config = toml::from_str(text)?;
        if config.mode == Mode::Chat && config.chat.is_none() {
            bail!("chat mode needs a [chat] section with base_url, model and key_env");
        }
        Ok(config)
    }

    /// Reads `path`, else the file named by [`CONFIG_ENV`], else defaults.
    /// Relative paths inside the file resolve against its directory.
    pub fn load(path: Option<&Path>) -> Result<Config> {
        let path = match path {
            Some(p) => p.to_path_buf(),
            None => match std::env::var_os(CONFIG_ENV) {
                Some(p) => PathBuf::from(p),
                None => return Ok(Config::default()),
            },
        };
        let text = std::fs::read_to_string(&path).with_context(|| format!("reading config {}", path.display()))?;
        let mut config = Config::parse(&text).with_context(|| format!("config {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [&mut config.thresholds, &mut config.library, &mut config.out_dir]
            .into_iter()
            .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(config)
    }

    pub fn chat(&self) -> Result<&ChatConfig> {
        self.chat.as_ref().context("no [chat] section in the config")
    }
}
