//! End-to-end normalization: Confidence and Inference on one branch, ROI
//! lookup on the other, merged with precedence confidence > ROI > inference.

use std::collections::HashMap;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::confidence;
use crate::embeddings::EmbeddingTable;
use crate::error::{Error, Result};
use crate::gazetteer::{AdPath, Gazetteer, LEVELS};
use crate::inference::{embed_input, infer_next_level, InferenceResult};
use crate::roi::RoiStore;
use crate::textscan::{normalize_text, Document, Lexicon, Sentence, TokenKind};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NormalizeOptions {
    pub use_inference: bool,
    pub use_roi: bool,
    /// Suppress inferences whose cosine similarity is below this value.
    pub min_similarity: Option<f64>,
    /// Keep inferring until the path is complete instead of one level.
    pub iterative_inference: bool,
}

impl Default for NormalizeOptions {
    fn default() -> Self {
        NormalizeOptions {
            use_inference: true,
            use_roi: true,
            min_similarity: None,
            iterative_inference: false,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Confidence,
    Roi,
    Inference,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoiMatch {
    pub term: String,
    pub path: AdPath,
    pub strength: f64,
    /// Whether the entry agrees with the Confidence prefix.
    pub consistent: bool,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageTimings {
    pub scan_ns: u64,
    pub confidence_ns: u64,
    pub inference_ns: u64,
    pub roi_ns: u64,
    pub merge_ns: u64,
    pub total_ns: u64,
}

impl StageTimings {
    pub fn stage_sum(&self) -> u64 {
        self.scan_ns + self.confidence_ns + self.inference_ns + self.roi_ns + self.merge_ns
    }

    fn add(&mut self, o: &StageTimings) {
        self.scan_ns += o.scan_ns;
        self.confidence_ns += o.confidence_ns;
        self.inference_ns += o.inference_ns;
        self.roi_ns += o.roi_ns;
        self.merge_ns += o.merge_ns;
        self.total_ns += o.total_ns;
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormalizationResult {
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub doc_id: Option<String>,
    pub confidence: AdPath,
    pub inference: InferenceResult,
    pub rois: Vec<RoiMatch>,
    #[serde(rename = "final")]
    pub final_path: AdPath,
    /// Which stage supplied each non-null level of `final`.
    pub provenance: [Option<Stage>; LEVELS],
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub timings: Option<StageTimings>,
}

impl NormalizationResult {
    pub fn without_timings(mut self) -> Self {
        self.timings = None;
        self
    }
}

fn elapsed_ns(t: Instant) -> u64 {
    t.elapsed().as_nanos() as u64
}

/// Loaded artifacts plus the compiled union lexicon. Immutable; share it
/// freely across threads.
pub struct Engine {
    gazetteer: Gazetteer,
    embeddings: Option<EmbeddingTable>,
    roi: Option<RoiStore>,
    lexicon: Lexicon,
    options: NormalizeOptions,
}

impl Engine {
    pub fn new(
        gazetteer: Gazetteer,
        embeddings: Option<EmbeddingTable>,
        roi: Option<RoiStore>,
        options: NormalizeOptions,
    ) -> Self {
        let mut builder = Lexicon::builder();
        if options.use_roi {
            if let Some(store) = &roi {
                builder = builder.words(store.terms());
            }
        }
        if options.use_inference {
            if let Some(table) = &embeddings {
                builder = builder.words(table.vocab());
            }
        }
        let lexicon = builder.gazetteer(&gazetteer).build();
        Engine {
            gazetteer,
            embeddings,
            roi,
            lexicon,
            options,
        }
    }

    /// Gazetteer-only engine (Confidence alone).
    pub fn confidence_only(gazetteer: Gazetteer) -> Self {
        let options = NormalizeOptions {
            use_inference: false,
            use_roi: false,
            ..NormalizeOptions::default()
        };
        Self::new(gazetteer, None, None, options)
    }

    pub fn gazetteer(&self) -> &Gazetteer {
        &self.gazetteer
    }

    pub fn embeddings(&self) -> Option<&EmbeddingTable> {
        self.embeddings.as_ref()
    }

    pub fn roi_store(&self) -> Option<&RoiStore> {
        self.roi.as_ref()
    }

    pub fn options(&self) -> &NormalizeOptions {
        &self.options
    }

    pub fn lexicon(&self) -> &Lexicon {
        &self.lexicon
    }

    /// Vocabulary keys of the scanned input: standard names for AD hits,
    /// surfaces for other lexicon words.
    fn input_keys<'s>(&'s self, sentences: &'s [Sentence]) -> impl Iterator<Item = &'s str> {
        sentences.iter().flat_map(|s| &s.tokens).filter_map(|t| match t.kind {
            TokenKind::AdHit => Some(self.gazetteer.record(t.records[0]).name.as_str()),
            TokenKind::LexiconWord => Some(t.surface.as_str()),
            TokenKind::Other => None,
        })
    }

    pub fn normalize(&self, text: &str) -> NormalizationResult {
        let start = Instant::now();
        let mut timings = StageTimings::default();

        let t = Instant::now();
        let text = normalize_text(text);
        let sentences = self.lexicon.scan_document(&text);
        timings.scan_ns = elapsed_ns(t);

        let t = Instant::now();
        let confidence = confidence::confidence(&sentences, &self.gazetteer);
        timings.confidence_ns = elapsed_ns(t);

        let t = Instant::now();
        let input_vector = match (&self.embeddings, self.options.use_inference) {
            (Some(table), true) if !confidence.is_complete() => embed_input(self.input_keys(&sentences), table),
            _ => None,
        };
        let inference = match (&self.embeddings, self.options.use_inference) {
            (Some(table), true) => infer_next_level(
                &confidence,
                input_vector.as_deref(),
                &self.gazetteer,
                table,
                self.options.min_similarity,
            ),
            _ => InferenceResult::default(),
        };
        timings.inference_ns = elapsed_ns(t);

        let t = Instant::now();
        let rois: Vec<RoiMatch> = match (&self.roi, self.options.use_roi) {
            (Some(store), true) => {
                let words = sentences
                    .iter()
                    .flat_map(|s| &s.tokens)
                    .filter(|t| t.kind == TokenKind::LexiconWord)
                    .map(|t| t.surface.as_str());
                store
                    .lookup(words)
                    .into_iter()
                    .map(|e| RoiMatch {
                        term: e.term.clone(),
                        path: e.path.clone(),
                        strength: e.strength(),
                        consistent: confidence.agrees_with(&e.path),
                    })
                    .collect()
            }
            _ => Vec::new(),
        };
        timings.roi_ns = elapsed_ns(t);

        let t = Instant::now();
        let (final_path, provenance) = self.merge(&confidence, &inference, &rois, input_vector.as_deref());
        timings.merge_ns = elapsed_ns(t);
        timings.total_ns = elapsed_ns(start);

        NormalizationResult {
            doc_id: None,
            confidence,
            inference,
            rois,
            final_path,
            provenance,
            timings: Some(timings),
        }
    }

    fn merge(
        &self,
        confidence: &AdPath,
        inference: &InferenceResult,
        rois: &[RoiMatch],
        input: Option<&[f64]>,
    ) -> (AdPath, [Option<Stage>; LEVELS]) {
        let mut path = confidence.clone();
        let mut provenance = [None; LEVELS];
        for p in provenance.iter_mut().take(path.depth()) {
            *p = Some(Stage::Confidence);
        }

        let best = rois
            .iter()
            .filter(|r| r.consistent && r.path.depth() > path.depth())
            .max_by(|a, b| a.strength.total_cmp(&b.strength).then_with(|| b.term.cmp(&a.term)));
        if let Some(r) = best {
            let start = path.depth();
            for (k, slot) in provenance.iter_mut().enumerate().take(r.path.depth()).skip(start) {
                path.set(k, r.path.name(k).map(str::to_owned), r.path.code(k).map(str::to_owned));
                *slot = Some(Stage::Roi);
            }
        }

        // inference extends the Confidence prefix only where ROI left it open
        if let Some(level) = inference.level_filled {
            if path.depth() == level - 1 && inference.is_filled() {
                path = inference.apply(&path);
                provenance[level - 1] = Some(Stage::Inference);
            }
        }

        if self.options.iterative_inference {
            if let Some(table) = &self.embeddings {
                while !path.is_complete() {
                    let r = infer_next_level(&path, input, &self.gazetteer, table, self.options.min_similarity);
                    let Some(level) = r.level_filled else { break };
                    path = r.apply(&path);
                    provenance[level - 1] = Some(Stage::Inference);
                }
            }
        }
        (path, provenance)
    }

    /// Normalizes a batch with `workers` threads; output order matches input.
    pub fn normalize_batch(&self, docs: &[Document], workers: usize) -> Vec<NormalizationResult> {
        let run = |d: &Document| NormalizationResult {
            doc_id: Some(d.doc_id.clone()),
            ..self.normalize(&d.text)
        };
        if workers <= 1 {
            return docs.iter().map(run).collect();
        }
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .expect("thread pool");
        pool.install(|| docs.par_iter().map(run).collect())
    }
}

/// Outcome of comparing one prediction with its gold path.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EvalRecord {
    pub doc_id: String,
    pub gold: AdPath,
    pub predicted: AdPath,
    pub hit_value: f64,
}

/// 1 when the prediction matches every gold level, 0.5 when it is a strict
/// non-empty prefix of the gold path, 0 otherwise. Compared by name.
pub fn hit_value(gold: &AdPath, predicted: &AdPath) -> f64 {
    let (gd, pd) = (gold.depth(), predicted.depth());
    if gd == 0 || pd == 0 {
        return 0.0;
    }
    let agree = |k: usize| predicted.name(k) == gold.name(k);
    if pd >= gd && (0..gd).all(|k| gold.name(k).is_none() || agree(k)) {
        1.0
    } else if pd < gd && (0..pd).all(agree) {
        0.5
    } else {
        0.0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EvalReport {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub hits: f64,
    pub predicted_docs: usize,
    pub gold_docs: usize,
    pub records: Vec<EvalRecord>,
}

/// Variant F1 where incomplete predictions count as half hits. Documents are
/// matched by id; both sides must cover the same ids.
pub fn evaluate(predictions: &[(String, AdPath)], gold: &[(String, AdPath)]) -> Result<EvalReport> {
    let mut gold_by_id: HashMap<&str, &AdPath> = HashMap::with_capacity(gold.len());
    for (id, p) in gold {
        if gold_by_id.insert(id, p).is_some() {
            return Err(Error::Misaligned(format!("duplicate gold id {id:?}")));
        }
    }
    if predictions.len() != gold.len() {
        return Err(Error::Misaligned(format!(
            "{} predictions vs {} gold documents",
            predictions.len(),
            gold.len()
        )));
    }
    let mut seen = std::collections::HashSet::new();
    let mut records = Vec::with_capacity(predictions.len());
    for (id, pred) in predictions {
        if !seen.insert(id.as_str()) {
            return Err(Error::Misaligned(format!("duplicate prediction id {id:?}")));
        }
        let g = gold_by_id
            .get(id.as_str())
            .ok_or_else(|| Error::Misaligned(format!("no gold path for {id:?}")))?;
        records.push(EvalRecord {
            doc_id: id.clone(),
            gold: (*g).clone(),
            predicted: pred.clone(),
            hit_value: hit_value(g, pred),
        });
    }
    let hits: f64 = records.iter().map(|r| r.hit_value).sum();
    let predicted_docs = records.iter().filter(|r| !r.predicted.is_empty()).count();
    let gold_docs = records.iter().filter(|r| !r.gold.is_empty()).count();
    let ratio = |n: usize| if n == 0 { 0.0 } else { hits / n as f64 };
    let (precision, recall) = (ratio(predicted_docs), ratio(gold_docs));
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    Ok(EvalReport {
        precision,
        recall,
        f1,
        hits,
        predicted_docs,
        gold_docs,
        records,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ThroughputRun {
    pub workers: usize,
    pub seconds: f64,
    pub bytes_per_sec: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BenchReport {
    pub documents: usize,
    pub bytes: usize,
    /// Single-worker run with the per-stage breakdown.
    pub single: ThroughputRun,
    pub stages: StageTimings,
    pub parallel: Vec<ThroughputRun>,
    /// Set when the corpus is below 1 MB.
    pub unstable: bool,
}

pub const STABLE_BENCH_BYTES: usize = 1 << 20;

/// Measures normalize throughput. One warm-up pass precedes the timed runs.
pub fn bench(engine: &Engine, docs: &[Document], parallel_workers: &[usize]) -> BenchReport {
    let bytes: usize = docs.iter().map(|d| d.text.len()).sum();
    for d in docs.iter().take(docs.len().min(200)) {
        std::hint::black_box(engine.normalize(&d.text));
    }

    let mut stages = StageTimings::default();
    let start = Instant::now();
    for d in docs {
        let r = engine.normalize(&d.text);
        if let Some(t) = &r.timings {
            stages.add(t);
        }
        std::hint::black_box(r);
    }
    let seconds = start.elapsed().as_secs_f64();
    let single = ThroughputRun {
        workers: 1,
        seconds,
        bytes_per_sec: bytes as f64 / seconds,
    };

    let parallel = parallel_workers
        .iter()
        .map(|&w| {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(w.max(1))
                .build()
                .expect("thread pool");
            let start = Instant::now();
            pool.install(|| {
                docs.par_iter().for_each(|d| {
                    std::hint::black_box(engine.normalize(&d.text));
                })
            });
            let seconds = start.elapsed().as_secs_f64();
            ThroughputRun {
                workers: w,
                seconds,
                bytes_per_sec: bytes as f64 / seconds,
            }
        })
        .collect();

    if bytes < STABLE_BENCH_BYTES {
        log::warn!("bench corpus is {bytes} bytes (< 1 MB); throughput is unstable");
    }
    BenchReport {
        documents: docs.len(),
        bytes,
        single,
        stages,
        parallel,
        unstable: bytes < STABLE_BENCH_BYTES,
    }
}
