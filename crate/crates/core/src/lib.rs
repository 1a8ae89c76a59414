//! Normalizes free Chinese text to a three-level administrative division
//! path (province, prefecture, county).
//!
//! Two signals are combined. Explicit AD mentions are scored by
//! [`confidence`] and extended by [`inference`] over skip-gram embeddings
//! trained on geographic sequences. Implicit landmark words are resolved
//! through a mined [`roi`] knowledge base. [`pipeline::Engine`] merges the
//! two.

pub mod confidence;
pub mod config;
pub mod embeddings;
pub mod error;
pub mod fixtures;
pub mod gazetteer;
pub mod inference;
pub mod pipeline;
pub mod roi;
pub mod sequence;
pub mod synth;
pub mod textscan;

pub use error::{Error, Result};
pub use gazetteer::{AdPath, AdRecord, Gazetteer, RecordId, LEVELS};
pub use pipeline::{Engine, NormalizationResult, NormalizeOptions};
pub use roi::{RoiStore, RoiThresholds};
pub use sequence::{GeoSequence, SequenceExtractor};
pub use textscan::{Document, Lexicon};
