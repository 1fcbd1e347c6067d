use std::path::{Path, PathBuf};

use funnel_core::docqa::DocQaConfig;
use funnel_core::embed::{EmbedderConfig, EmbedderKind};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {}: {source}", path.display())]
    Read { path: PathBuf, source: std::io::Error },
    #[error("invalid config {}: {message}", path.display())]
    Parse { path: PathBuf, message: String },
    #[error("invalid value for {key}: {value:?}")]
    Env { key: String, value: String },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScorerKind {
    /// IDF-weighted term overlap; needs no model.
    #[default]
    Lexical,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScorerConfig {
    pub kind: ScorerKind,
}

/// Settings shared by the service and the CLI. Read from a TOML file, then
/// overridden by `FUNNEL_*` environment variables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServiceConfig {
    pub corpus: Option<PathBuf>,
    pub ontology: Option<PathBuf>,
    pub lexicon: Option<PathBuf>,
    /// Prebuilt sparse index; rebuilt from the corpus when absent.
    pub index: Option<PathBuf>,
    pub host: String,
    pub port: u16,
    pub embedder: EmbedderConfig,
    pub scorer: ScorerConfig,
    pub docqa: DocQaConfig,
    pub trace_capacity: usize,
    pub cache_capacity: usize,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            corpus: None,
            ontology: None,
            lexicon: None,
            index: None,
            host: "127.0.0.1".into(),
            port: 8080,
            embedder: EmbedderConfig::default(),
            scorer: ScorerConfig::default(),
            docqa: DocQaConfig::default(),
            trace_capacity: 1000,
            cache_capacity: 32,
        }
    }
}

impl ServiceConfig {
    pub fn from_toml(text: &str, path: &Path) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse { path: path.to_path_buf(), message: e.to_string() })
    }

    /// Reads `path` if given (defaults otherwise) and applies the process
    /// environment.
    pub fn load(path: Option<&Path>) -> Result<Self, ConfigError> {
        let mut config = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|source| ConfigError::Read { path: p.to_path_buf(), source })?;
                Self::from_toml(&text, p)?
            }
            None => Self::default(),
        };
        config.apply_env(std::env::vars())?;
        Ok(config)
    }

    /// Recognised keys: `FUNNEL_CORPUS`, `FUNNEL_ONTOLOGY`, `FUNNEL_LEXICON`,
    /// `FUNNEL_INDEX`, `FUNNEL_HOST`, `FUNNEL_PORT`, `FUNNEL_EMBEDDER`
    /// (`reference` or `remote`), `FUNNEL_EMBEDDER_ENDPOINT`,
    /// `FUNNEL_EMBEDDER_DIMENSION`, `FUNNEL_EMBEDDER_TIMEOUT_MS`, `FUNNEL_SCORER`.
    pub fn apply_env(&mut self, vars: impl IntoIterator<Item = (String, String)>) -> Result<(), ConfigError> {
        fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, ConfigError> {
            value.trim().parse().map_err(|_| ConfigError::Env { key: key.into(), value: value.into() })
        }
        for (key, value) in vars {
            match key.as_str() {
                "FUNNEL_CORPUS" => self.corpus = Some(value.into()),
                "FUNNEL_ONTOLOGY" => self.ontology = Some(value.into()),
                "FUNNEL_LEXICON" => self.lexicon = Some(value.into()),
                "FUNNEL_INDEX" => self.index = Some(value.into()),
                "FUNNEL_HOST" => self.host = value,
                "FUNNEL_PORT" => self.port = parse(&key, &value)?,
                "FUNNEL_EMBEDDER" => {
                    self.embedder.kind = match value.trim() {
                        "reference" => EmbedderKind::Reference,
                        "remote" => EmbedderKind::Remote,
                        _ => return Err(ConfigError::Env { key, value }),
                    }
                }
                "FUNNEL_EMBEDDER_ENDPOINT" => self.embedder.endpoint = Some(value),
                "FUNNEL_EMBEDDER_DIMENSION" => self.embedder.dimension = parse(&key, &value)?,
                "FUNNEL_EMBEDDER_TIMEOUT_MS" => self.embedder.timeout_ms = parse(&key, &value)?,
                "FUNNEL_SCORER" => {
                    self.scorer.kind = match value.trim() {
                        "lexical" => ScorerKind::Lexical,
                        _ => return Err(ConfigError::Env { key, value }),
                    }
                }
                _ => {}
            }
        }
        Ok(())
    }
}
