//! Fills the next unknown level from implicit evidence: the mean embedding
//! of the input's in-vocabulary tokens is compared by cosine against the
//! embeddings of the candidate subdivisions.

use serde::{Deserialize, Serialize};

use crate::embeddings::{cosine, EmbeddingTable};
use crate::gazetteer::{AdPath, Gazetteer};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct InferenceResult {
    /// 1-based level that was filled.
    pub level_filled: Option<usize>,
    pub chosen: Option<String>,
    pub chosen_code: Option<String>,
    pub similarity: Option<f64>,
    pub candidates_considered: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub diagnostic: Option<String>,
}

impl InferenceResult {
    fn none(diagnostic: impl Into<String>, considered: usize) -> Self {
        InferenceResult {
            candidates_considered: considered,
            diagnostic: Some(diagnostic.into()),
            ..Self::default()
        }
    }

    pub fn is_filled(&self) -> bool {
        self.chosen.is_some()
    }

    /// `path` extended by the inferred division, when there is one.
    pub fn apply(&self, path: &AdPath) -> AdPath {
        let mut out = path.clone();
        if let (Some(level), Some(name)) = (self.level_filled, &self.chosen) {
            out.set(level - 1, Some(name.clone()), self.chosen_code.clone());
        }
        out
    }
}

/// Mean of the input vectors of every token found in the vocabulary,
/// counting repeated tokens once per occurrence.
pub fn embed_input<'a, I>(tokens: I, table: &EmbeddingTable) -> Option<Vec<f64>>
where
    I: IntoIterator<Item = &'a str>,
{
    let mut sum = vec![0.0; table.dim()];
    let mut n = 0usize;
    for t in tokens {
        if let Some(v) = table.vector(t) {
            for (s, x) in sum.iter_mut().zip(v) {
                *s += x;
            }
            n += 1;
        }
    }
    (n > 0).then(|| sum.into_iter().map(|s| s / n as f64).collect())
}

/// Chooses the child of `confidence` whose embedding is most cosine-similar
/// to `input`. Fills at most one level; a complete path is returned as a
/// no-op. Ties go to the lower code.
pub fn infer_next_level(
    confidence: &AdPath,
    input: Option<&[f64]>,
    gazetteer: &Gazetteer,
    table: &EmbeddingTable,
    min_similarity: Option<f64>,
) -> InferenceResult {
    if confidence.is_complete() {
        return InferenceResult::default();
    }
    let Some(input) = input else {
        return InferenceResult::none("no input token is in the vocabulary", 0);
    };
    let children = match gazetteer.children(confidence) {
        Ok(c) => c,
        Err(e) => return InferenceResult::none(format!("cannot expand path: {e}"), 0),
    };
    let mut best: Option<(usize, f64)> = None;
    let mut considered = 0;
    for (i, &child) in children.iter().enumerate() {
        let Some(v) = table.vector(&gazetteer.record(child).name) else {
            continue;
        };
        considered += 1;
        let sim = cosine(v, input);
        if best.is_none_or(|(_, b)| sim > b) {
            best = Some((i, sim));
        }
    }
    let Some((i, sim)) = best else {
        return InferenceResult::none("no candidate division is in the vocabulary", 0);
    };
    if min_similarity.is_some_and(|m| sim < m) {
        return InferenceResult::none(format!("best similarity {sim:.4} below threshold"), considered);
    }
    let record = gazetteer.record(children[i]);
    InferenceResult {
        level_filled: Some(confidence.depth() + 1),
        chosen: Some(record.name.clone()),
        chosen_code: Some(record.code.clone()),
        similarity: Some(sim),
        candidates_considered: considered,
        diagnostic: None,
    }
}
