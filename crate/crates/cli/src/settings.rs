//! Resolves configuration and artifacts from the config file, the
//! environment and command-line flags, in increasing precedence.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::Args;
use geonorm::config::Config;
use geonorm::embeddings::EmbeddingTable;
use geonorm::{fixtures, Engine, Gazetteer, NormalizeOptions, RoiStore};

#[derive(Args, Clone, Debug, Default)]
pub struct GlobalArgs {
    /// Gazetteer JSONL; the bundled fixture gazetteer when omitted.
    #[arg(long, global = true)]
    pub gazetteer: Option<PathBuf>,
    /// Embedding table written by train-embeddings.
    #[arg(long, global = true)]
    pub embeddings: Option<PathBuf>,
    /// ROI store written by build-roi.
    #[arg(long, global = true)]
    pub roi_store: Option<PathBuf>,
    /// TOML configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Seed for training, clustering and synthetic corpora.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
}

#[derive(Clone, Debug)]
pub struct Settings {
    pub config: Config,
}

impl Settings {
    pub fn resolve(args: &GlobalArgs) -> Result<Self> {
        let config = Config::resolve(args.config.as_deref())
            .with_context(|| format!("loading configuration {:?}", args.config))?;
        Ok(Self::apply(config, args))
    }

    /// Applies command-line flags on top of an already resolved config.
    pub fn apply(mut config: Config, args: &GlobalArgs) -> Self {
        if let Some(p) = &args.gazetteer {
            config.artifacts.gazetteer = Some(p.clone());
        }
        if let Some(p) = &args.embeddings {
            config.artifacts.embeddings = Some(p.clone());
        }
        if let Some(p) = &args.roi_store {
            config.artifacts.roi_store = Some(p.clone());
        }
        if let Some(seed) = args.seed {
            config.run.seed = seed;
            config.train.seed = seed;
            config.cluster.seed = seed;
        }
        if let Some(w) = args.workers {
            config.run.workers = w;
        }
        config.run.workers = config.run.workers.max(1);
        Settings { config }
    }

    pub fn workers(&self) -> usize {
        self.config.run.workers
    }

    fn uses_bundled_gazetteer(&self) -> bool {
        self.config.artifacts.gazetteer.is_none()
    }

    pub fn gazetteer(&self) -> Result<Gazetteer> {
        match &self.config.artifacts.gazetteer {
            Some(p) => Gazetteer::load(p).with_context(|| format!("loading gazetteer {}", p.display())),
            None => Ok(Gazetteer::bundled()),
        }
    }

    /// The configured table, or the bundled one when the gazetteer is also
    /// the bundled one.
    pub fn embeddings(&self) -> Result<Option<EmbeddingTable>> {
        match &self.config.artifacts.embeddings {
            Some(p) => EmbeddingTable::load(p)
                .map(Some)
                .with_context(|| format!("loading embeddings {}", p.display())),
            None if self.uses_bundled_gazetteer() => Ok(Some(fixtures::embeddings())),
            None => Ok(None),
        }
    }

    pub fn roi_store(&self, g: &Gazetteer) -> Result<Option<RoiStore>> {
        match &self.config.artifacts.roi_store {
            Some(p) => RoiStore::load(p, g)
                .map(Some)
                .with_context(|| format!("loading ROI store {}", p.display())),
            None if self.uses_bundled_gazetteer() => Ok(Some(fixtures::roi_store(g))),
            None => Ok(None),
        }
    }

    pub fn engine(&self) -> Result<Engine> {
        self.engine_with(self.config.normalize.clone())
    }

    pub fn engine_with(&self, options: NormalizeOptions) -> Result<Engine> {
        let g = self.gazetteer()?;
        let embeddings = self.embeddings()?;
        let roi = self.roi_store(&g)?;
        if options.use_inference && embeddings.is_none() {
            log::warn!("no embeddings configured; inference is disabled");
        }
        if options.use_roi && roi.is_none() {
            log::warn!("no ROI store configured; ROI lookup is disabled");
        }
        Ok(Engine::new(g, embeddings, roi, options))
    }

    /// `explicit`, falling back to the configured artifact path.
    pub fn output_path(explicit: Option<&Path>, configured: Option<&PathBuf>, what: &str) -> Result<PathBuf> {
        explicit
            .map(Path::to_path_buf)
            .or_else(|| configured.cloned())
            .with_context(|| format!("no output path for {what}; pass --output"))
    }
}
