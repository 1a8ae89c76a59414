//! Run configuration.
//!
//! A TOML file with one table per stage. Every key is optional; missing
//! keys keep their defaults. Any key can be overridden from the environment
//! as `GEONORM_<TABLE>_<KEY>`, e.g. `GEONORM_ROI_MAX_ENTROPY=0.8`.
//!
//! ```toml
//! [artifacts]
//! gazetteer = "data/gazetteer.jsonl"
//! embeddings = "out/embeddings.txt"
//! roi_store = "out/roi.jsonl"
//!
//! [run]
//! seed = 42
//! workers = 1
//!
//! [text]
//! delimiters = "。！？!?；;\n"
//!
//! [extract]
//! radius = 1        # sentences on each side of an anchor sentence
//! min_len = 3       # shortest sequence kept
//!
//! [train]
//! window = 5
//! dim = 100
//! epochs = 5
//! learning_rate = 0.025
//! seed = 42
//! negatives = 0     # 0 = full softmax
//! track_objective = true
//!
//! [cluster]
//! k = 100
//! seed = 42
//! max_iter = 300
//! restarts = 10
//! normalize = true
//!
//! [roi]
//! min_score = 1.0
//! max_entropy = 1.0
//! magnitude_ratio = 10.0
//! top_k = 3
//!
//! [normalize]
//! use_inference = true
//! use_roi = true
//! min_similarity = 0.0   # omit to accept any similarity
//! iterative_inference = false
//!
//! [server]
//! addr = "127.0.0.1:8080"
//! max_body_bytes = 1048576
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::embeddings::{KMeansConfig, TrainConfig};
use crate::error::{Error, Result};
use crate::pipeline::NormalizeOptions;
use crate::roi::RoiThresholds;
use crate::sequence::ExtractConfig;
use crate::textscan::{SentenceSplitter, DEFAULT_DELIMITERS};

pub const ENV_PREFIX: &str = "GEONORM_";

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ArtifactPaths {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gazetteer: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub embeddings: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub roi_store: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub workers: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig { seed: 42, workers: 1 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TextConfig {
    pub delimiters: String,
}

impl Default for TextConfig {
    fn default() -> Self {
        TextConfig {
            delimiters: DEFAULT_DELIMITERS.iter().collect(),
        }
    }
}

impl TextConfig {
    pub fn splitter(&self) -> SentenceSplitter {
        SentenceSplitter::new(self.delimiters.chars())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServerConfig {
    pub addr: String,
    /// Requests with larger bodies are rejected with 413.
    pub max_body_bytes: usize,
}

impl Default for ServerConfig {
    fn default() -> Self {
        ServerConfig {
            addr: "127.0.0.1:8080".into(),
            max_body_bytes: 1 << 20,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub artifacts: ArtifactPaths,
    pub run: RunConfig,
    pub text: TextConfig,
    pub extract: ExtractConfig,
    pub train: TrainConfig,
    pub cluster: KMeansConfig,
    pub roi: RoiThresholds,
    pub normalize: NormalizeOptions,
    pub server: ServerConfig,
}

impl Config {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always serializable")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    /// Loads `path` (or defaults) and applies the process environment.
    pub fn resolve(path: Option<&Path>) -> Result<Self> {
        let base = match path {
            Some(p) => Self::load(p)?,
            None => Self::default(),
        };
        base.with_overrides(std::env::vars())
    }

    /// Applies `GEONORM_<TABLE>_<KEY>` overrides. Values are read as TOML
    /// scalars, falling back to a bare string.
    pub fn with_overrides<I, K, V>(&self, vars: I) -> Result<Self>
    where
        I: IntoIterator<Item = (K, V)>,
        K: AsRef<str>,
        V: AsRef<str>,
    {
        let mut doc: toml::Table = toml::Table::try_from(self).map_err(|e| Error::Config(e.to_string()))?;
        let mut touched = false;
        for (k, v) in vars {
            let Some(rest) = k.as_ref().strip_prefix(ENV_PREFIX) else {
                continue;
            };
            let rest = rest.to_ascii_lowercase();
            let Some((table, key)) = rest.split_once('_') else {
                return Err(Error::Config(format!("malformed override {}", k.as_ref())));
            };
            let section = doc
                .entry(table)
                .or_insert_with(|| toml::Value::Table(toml::Table::new()));
            let toml::Value::Table(section) = section else {
                return Err(Error::Config(format!("{table} is not a table")));
            };
            section.insert(key.to_owned(), parse_scalar(v.as_ref()));
            touched = true;
        }
        if !touched {
            return Ok(self.clone());
        }
        doc.try_into()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string()))
    }
}

fn parse_scalar(raw: &str) -> toml::Value {
    toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_owned()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embeddings::SoftmaxMode;

    #[test]
    fn defaults_round_trip() {
        let c = Config::default();
        assert_eq!(Config::from_toml(&c.to_toml()).unwrap(), c);
        assert_eq!(Config::from_toml("").unwrap(), c);
    }

    #[test]
    fn documented_example_parses() {
        let doc: String = include_str!("config.rs")
            .lines()
            .skip_while(|l| !l.starts_with("//! ```toml"))
            .skip(1)
            .take_while(|l| !l.starts_with("//! ```"))
            .map(|l| l.trim_start_matches("//!").trim_start())
            .collect::<Vec<_>>()
            .join("\n");
        let c = Config::from_toml(&doc).unwrap();
        assert_eq!(c.roi, RoiThresholds::default());
        assert_eq!(c.train.mode, SoftmaxMode::Full);
        assert_eq!(c.normalize.min_similarity, Some(0.0));
    }

    #[test]
    fn partial_file_and_unknown_keys() {
        let c = Config::from_toml("[roi]\nmax_entropy = 0.5\n[train]\nnegatives = 5\n").unwrap();
        assert_eq!(c.roi.max_entropy, 0.5);
        assert_eq!(c.roi.top_k, 3);
        assert_eq!(c.train.mode, SoftmaxMode::NegativeSampling { negatives: 5 });
        assert!(Config::from_toml("[roi]\nmax_entopy = 0.5\n").is_err());
    }

    #[test]
    fn env_overrides() {
        let c = Config::default()
            .with_overrides([
                ("GEONORM_ROI_MAX_ENTROPY", "0.75"),
                ("GEONORM_SERVER_ADDR", "0.0.0.0:9000"),
                ("GEONORM_EXTRACT_MIN_LEN", "4"),
                ("GEONORM_NORMALIZE_MIN_SIMILARITY", "0.2"),
                ("PATH", "/usr/bin"),
            ])
            .unwrap();
        assert_eq!(c.roi.max_entropy, 0.75);
        assert_eq!(c.server.addr, "0.0.0.0:9000");
        assert_eq!(c.extract.min_len, 4);
        assert_eq!(c.normalize.min_similarity, Some(0.2));
        assert!(Config::default()
            .with_overrides([("GEONORM_ROI_TOP_K", "many")])
            .is_err());
        assert!(Config::default().with_overrides([("GEONORM_BOGUS", "1")]).is_err());
    }
}
