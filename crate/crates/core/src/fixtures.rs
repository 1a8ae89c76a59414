//! Data bundled with the crate.
//!
//! The gazetteer is hand-written. Everything else is generated by [`build`]
//! from the synthetic landmark corpus and committed under `data/`; run
//! `cargo run -p geonorm-core --example regenerate_fixtures` after changing
//! the generator or any mining parameter.

use crate::config::Config;
use crate::embeddings::{train, EmbeddingTable, TrainConfig};
use crate::error::Result;
use crate::gazetteer::Gazetteer;
use crate::pipeline::{Engine, NormalizeOptions};
use crate::roi::{build_roi, RoiStore};
use crate::sequence::{GeoSequence, LexiconRecognizer, SequenceExtractor};
use crate::synth::{landmark_corpus, location_lexicon, CorpusParams};
use crate::textscan::Document;

/// Small gazetteer covering the provinces used in examples and tests.
pub const GAZETTEER_JSONL: &str = include_str!("../data/gazetteer.jsonl");
pub const CORPUS_JSONL: &str = include_str!("../data/corpus.jsonl");
/// One location word per line.
pub const LOCATIONS_TXT: &str = include_str!("../data/locations.txt");
pub const EMBEDDINGS_TXT: &str = include_str!("../data/embeddings.txt");
pub const ROI_JSONL: &str = include_str!("../data/roi.jsonl");

pub const CORPUS_SEED: u64 = 2019;

/// Parameters the bundled artifacts were built with.
pub fn bundle_config() -> Config {
    Config {
        train: TrainConfig {
            dim: 32,
            epochs: 5,
            ..TrainConfig::default()
        },
        ..Config::default()
    }
}

pub fn corpus() -> Vec<Document> {
    CORPUS_JSONL
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).expect("bundled corpus is valid"))
        .collect()
}

pub fn locations() -> Vec<&'static str> {
    LOCATIONS_TXT.lines().filter(|l| !l.trim().is_empty()).collect()
}

pub fn embeddings() -> EmbeddingTable {
    EmbeddingTable::from_text(EMBEDDINGS_TXT).expect("bundled embeddings are valid")
}

pub fn roi_store(g: &Gazetteer) -> RoiStore {
    RoiStore::from_jsonl(ROI_JSONL, g).expect("bundled ROI store matches the bundled gazetteer")
}

/// Engine over the bundled gazetteer, embeddings and ROI store.
pub fn engine(options: NormalizeOptions) -> Engine {
    let g = Gazetteer::bundled();
    let roi = roi_store(&g);
    Engine::new(g, Some(embeddings()), Some(roi), options)
}

pub struct Bundle {
    pub corpus: Vec<Document>,
    pub sequences: Vec<GeoSequence>,
    pub embeddings: EmbeddingTable,
    pub roi: RoiStore,
}

impl Bundle {
    /// `(file name under data/, contents)` for every generated artifact.
    pub fn files(&self) -> Vec<(&'static str, String)> {
        let corpus: String = self
            .corpus
            .iter()
            .map(|d| serde_json::to_string(d).expect("documents serialize") + "\n")
            .collect();
        let locations: String = location_lexicon().iter().map(|w| format!("{w}\n")).collect();
        vec![
            ("corpus.jsonl", corpus),
            ("locations.txt", locations),
            ("embeddings.txt", self.embeddings.to_text()),
            ("roi.jsonl", self.roi.to_jsonl()),
        ]
    }
}

/// Runs extraction, training and mining over the landmark corpus.
pub fn build(g: &Gazetteer, config: &Config) -> Result<Bundle> {
    let corpus = landmark_corpus(g, CORPUS_SEED, &CorpusParams::default());
    let recognizer = LexiconRecognizer::new(g, location_lexicon());
    let sequences = SequenceExtractor::new(g, Box::new(recognizer), config.extract.clone())?
        .with_splitter(config.text.splitter())
        .extract_corpus(&corpus);
    let (embeddings, _) = train(&sequences, &config.train)?;
    let roi = build_roi(&sequences, g, &config.roi)?;
    Ok(Bundle {
        corpus,
        sequences,
        embeddings,
        roi,
    })
}
