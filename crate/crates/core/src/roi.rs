//! Region-of-interest knowledge base.
//!
//! A geographic word becomes an ROI when its co-occurrence with AD names is
//! concentrated on one hierarchy. Mining runs count -> tf-idf score ->
//! validity filter -> entropy cutoff -> parent reweighting -> top pairs of
//! the same order of magnitude -> chain-consistent path. The result is kept
//! in an exact-match index persisted as JSONL.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gazetteer::{AdPath, Gazetteer, RecordId, LEVELS};
use crate::sequence::{GeoSequence, ItemKind};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RoiThresholds {
    /// Pairs scoring below this are invalid.
    pub min_score: f64,
    /// Terms whose score entropy (nats) exceeds this are rejected.
    pub max_entropy: f64,
    /// Pairs with `g < g_max / magnitude_ratio` are not retained.
    pub magnitude_ratio: f64,
    pub top_k: usize,
}

impl Default for RoiThresholds {
    fn default() -> Self {
        RoiThresholds {
            min_score: 1.0,
            max_entropy: 1.0,
            magnitude_ratio: 10.0,
            top_k: 3,
        }
    }
}

/// Co-occurrence statistics over a sequence set. Each pair is counted at
/// most once per sequence.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PairCounts {
    /// `(geo word, AD name) -> number of sequences containing both`.
    pub pairs: BTreeMap<(String, String), usize>,
    /// `AD name -> number of sequences containing it`.
    pub df: BTreeMap<String, usize>,
    pub total_sequences: usize,
}

impl PairCounts {
    pub fn count(&self, term: &str, ad: &str) -> usize {
        self.pairs.get(&(term.to_owned(), ad.to_owned())).copied().unwrap_or(0)
    }
}

fn distinct(seq: &GeoSequence, kind: ItemKind) -> Vec<&str> {
    let mut v: Vec<&str> = seq
        .items
        .iter()
        .filter(|i| i.kind == kind)
        .map(|i| i.surface.as_str())
        .collect();
    v.sort_unstable();
    v.dedup();
    v
}

pub fn count_pairs(sequences: &[GeoSequence]) -> PairCounts {
    let mut pairs: HashMap<(&str, &str), usize> = HashMap::new();
    let mut df: HashMap<&str, usize> = HashMap::new();
    for s in sequences {
        let ads = distinct(s, ItemKind::Ad);
        for &a in &ads {
            *df.entry(a).or_default() += 1;
        }
        for g in distinct(s, ItemKind::Geo) {
            for &a in &ads {
                *pairs.entry((g, a)).or_default() += 1;
            }
        }
    }
    PairCounts {
        pairs: pairs
            .into_iter()
            .map(|((g, a), n)| ((g.to_owned(), a.to_owned()), n))
            .collect(),
        df: df.into_iter().map(|(a, n)| (a.to_owned(), n)).collect(),
        total_sequences: sequences.len(),
    }
}

/// `ln(total / (1 + df))`.
pub fn idf(df: usize, total_sequences: usize) -> f64 {
    (total_sequences as f64 / (1 + df) as f64).ln()
}

/// `count * idf(df)`.
pub fn score_pair(count: usize, df: usize, total_sequences: usize) -> Result<f64> {
    if total_sequences < 1 {
        return Err(Error::Empty("sequence set"));
    }
    if count < 1 || df < 1 {
        return Err(Error::Config(format!("count ({count}) and df ({df}) must be >= 1")));
    }
    Ok(count as f64 * idf(df, total_sequences))
}

/// Shannon entropy (nats) of the scores normalized to a distribution.
pub fn entropy(scores: &[f64]) -> Result<f64> {
    if scores.is_empty() {
        return Err(Error::Empty("score list"));
    }
    if scores.iter().any(|&g| g.is_nan() || g <= 0.0) {
        return Err(Error::Config("scores must be positive".into()));
    }
    let total: f64 = scores.iter().sum();
    let h = -scores
        .iter()
        .map(|g| {
            let p = g / total;
            p * p.ln()
        })
        .sum::<f64>();
    Ok(h.max(0.0))
}

/// Presence sets used by parent reweighting.
pub struct SequenceIndex<'a> {
    sequences: &'a [GeoSequence],
    /// AD name -> indices of sequences containing it.
    by_ad: HashMap<&'a str, Vec<usize>>,
    /// Per-sequence distinct AD names.
    ads: Vec<HashSet<&'a str>>,
    /// (AD name, doc id) -> number of sequences of that doc containing it.
    per_doc: HashMap<(&'a str, &'a str), usize>,
}

impl<'a> SequenceIndex<'a> {
    pub fn new(sequences: &'a [GeoSequence]) -> Self {
        let mut by_ad: HashMap<&str, Vec<usize>> = HashMap::new();
        let mut per_doc: HashMap<(&str, &str), usize> = HashMap::new();
        let mut ads = Vec::with_capacity(sequences.len());
        for (i, s) in sequences.iter().enumerate() {
            let set: HashSet<&str> = s.ad_names().collect();
            for &a in &set {
                by_ad.entry(a).or_default().push(i);
                *per_doc.entry((a, s.doc_id.as_str())).or_default() += 1;
            }
            ads.push(set);
        }
        SequenceIndex {
            sequences,
            by_ad,
            ads,
            per_doc,
        }
    }

    /// `(numerator, denominator)` of the probability that a sequence
    /// mentioning `parent` but not `child` belongs to `child`: the
    /// denominator counts sequences with the parent and without the child,
    /// the numerator those among them whose same-document sibling sequences
    /// mention the child.
    pub fn parent_counts(&self, child: &str, parent: &str) -> (usize, usize) {
        let (mut num, mut den) = (0, 0);
        for &i in self.by_ad.get(parent).map_or(&[][..], Vec::as_slice) {
            if self.ads[i].contains(child) {
                continue;
            }
            den += 1;
            let doc = self.sequences[i].doc_id.as_str();
            if self.per_doc.get(&(child, doc)).copied().unwrap_or(0) > 0 {
                num += 1;
            }
        }
        (num, den)
    }
}

/// Divides `g` by the parent-only probability. Returns `g` unchanged when
/// either count is zero.
pub fn reweight_parent(g: f64, child: &str, parent: &str, index: &SequenceIndex<'_>) -> f64 {
    match index.parent_counts(child, parent) {
        (0, _) | (_, 0) => g,
        (num, den) => g / (num as f64 / den as f64),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairScore {
    pub term: String,
    pub ad_name: String,
    pub raw_count: usize,
    pub idf: f64,
    pub score: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Support {
    pub ad: String,
    pub g: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RoiEntry {
    pub term: String,
    pub path: AdPath,
    pub entropy: f64,
    pub support: Vec<Support>,
}

impl RoiEntry {
    /// Highest retained support score.
    pub fn strength(&self) -> f64 {
        self.support.iter().map(|s| s.g).fold(0.0, f64::max)
    }
}

#[derive(Serialize, Deserialize)]
struct EntryRow {
    term: String,
    path: [Option<String>; LEVELS],
    entropy: f64,
    support: Vec<Support>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RoiMeta {
    pub thresholds: RoiThresholds,
    pub total_sequences: usize,
    pub distinct_pairs: usize,
    pub candidate_terms: usize,
    pub rejected_no_valid_pair: usize,
    pub rejected_entropy: usize,
    pub rejected_inconsistent: usize,
    pub entries: usize,
}

/// Exact-match ROI index.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RoiStore {
    entries: BTreeMap<String, RoiEntry>,
    pub meta: RoiMeta,
}

/// Why a term did not become an ROI.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Rejection {
    NoValidPair,
    Entropy,
    Inconsistent,
}

/// Names whose records include a direct parent of a record named `child`.
fn is_parent_name(g: &Gazetteer, parent: &str, child: &str) -> bool {
    let parents = records_named(g, parent);
    records_named(g, child)
        .iter()
        .any(|&c| g.parent(c).is_some_and(|p| parents.contains(&p)))
}

/// Records whose standard name is `name`; falls back to alias hits.
fn records_named(g: &Gazetteer, name: &str) -> Vec<RecordId> {
    let hits = g.lookup(name);
    let exact: Vec<RecordId> = hits.iter().copied().filter(|&id| g.record(id).name == name).collect();
    if exact.is_empty() {
        hits.to_vec()
    } else {
        exact
    }
}

type Chain = [Option<RecordId>; LEVELS];

fn chain_depth(c: &Chain) -> usize {
    c.iter().rposition(Option::is_some).map_or(0, |k| k + 1)
}

/// Deeper of two chains when one extends the other.
fn merge_chains(a: &Chain, b: &Chain) -> Option<Chain> {
    let (short, long) = if chain_depth(a) <= chain_depth(b) {
        (a, b)
    } else {
        (b, a)
    };
    (0..chain_depth(short)).all(|k| short[k] == long[k]).then_some(*long)
}

/// Resolves retained AD names to one hierarchy. Every combination of
/// readings (one record per name) that lies on a single chain yields a
/// merged path; the term is kept only if all such paths are themselves
/// mutually consistent, and then the deepest is used.
pub fn resolve_chain<S: AsRef<str>>(g: &Gazetteer, names: &[S]) -> Option<AdPath> {
    let readings: Vec<Vec<Chain>> = names
        .iter()
        .map(|n| {
            records_named(g, n.as_ref())
                .into_iter()
                .filter_map(|id| g.chain(id).ok())
                .collect()
        })
        .collect();
    if readings.iter().any(Vec::is_empty) {
        return None;
    }
    let mut merged: Vec<Chain> = Vec::new();
    let mut choice = vec![0usize; readings.len()];
    loop {
        let mut acc: Option<Chain> = Some([None; LEVELS]);
        for (i, &c) in choice.iter().enumerate() {
            acc = acc.and_then(|a| merge_chains(&a, &readings[i][c]));
        }
        if let Some(m) = acc {
            if !merged.contains(&m) {
                merged.push(m);
            }
        }
        // odometer increment
        let mut pos = 0;
        loop {
            if pos == choice.len() {
                let mut it = merged.iter();
                let first = *it.next()?;
                let best = it.try_fold(first, |a, b| merge_chains(&a, b))?;
                return Some(g.path_from_ids(&best));
            }
            choice[pos] += 1;
            if choice[pos] < readings[pos].len() {
                break;
            }
            choice[pos] = 0;
            pos += 1;
        }
    }
}

/// Mines one term. `pairs` are `(AD name, count)` for the term.
pub fn mine_term(
    term: &str,
    pairs: &[(&str, usize)],
    counts: &PairCounts,
    index: &SequenceIndex<'_>,
    g: &Gazetteer,
    th: &RoiThresholds,
) -> std::result::Result<RoiEntry, Rejection> {
    let total = counts.total_sequences;
    let mut scored: Vec<(&str, f64)> = pairs
        .iter()
        .filter_map(|&(ad, n)| {
            let df = counts.df.get(ad).copied().unwrap_or(0);
            let s = score_pair(n, df, total).ok()?;
            (s > 0.0 && s >= th.min_score).then_some((ad, s))
        })
        .collect();
    if scored.is_empty() {
        return Err(Rejection::NoValidPair);
    }
    sort_desc(&mut scored);
    let scores: Vec<f64> = scored.iter().map(|(_, s)| *s).collect();
    let e = entropy(&scores).expect("scores are positive");
    if e > th.max_entropy {
        return Err(Rejection::Entropy);
    }

    let mut adjusted = scored.clone();
    for i in 1..scored.len() {
        let child = scored[i].0;
        if let Some(&(parent, _)) = scored[..i].iter().find(|(p, _)| is_parent_name(g, p, child)) {
            adjusted[i].1 = reweight_parent(scored[i].1, child, parent, index);
        }
    }
    sort_desc(&mut adjusted);

    let g_max = adjusted[0].1;
    let retained: Vec<(&str, f64)> = adjusted
        .into_iter()
        .filter(|(_, s)| *s >= g_max / th.magnitude_ratio)
        .take(th.top_k.max(1))
        .collect();
    let names: Vec<&str> = retained.iter().map(|(n, _)| *n).collect();
    let path = resolve_chain(g, &names).ok_or(Rejection::Inconsistent)?;
    Ok(RoiEntry {
        term: term.to_owned(),
        path,
        entropy: e,
        support: retained
            .into_iter()
            .map(|(ad, g)| Support { ad: ad.to_owned(), g })
            .collect(),
    })
}

fn sort_desc(v: &mut [(&str, f64)]) {
    v.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(b.0)));
}

pub fn build_roi(sequences: &[GeoSequence], g: &Gazetteer, th: &RoiThresholds) -> Result<RoiStore> {
    if sequences.is_empty() {
        return Err(Error::Empty("sequence set"));
    }
    let counts = count_pairs(sequences);
    let index = SequenceIndex::new(sequences);
    let mut by_term: BTreeMap<&str, Vec<(&str, usize)>> = BTreeMap::new();
    for ((term, ad), &n) in &counts.pairs {
        by_term.entry(term).or_default().push((ad, n));
    }
    let mut meta = RoiMeta {
        thresholds: th.clone(),
        total_sequences: counts.total_sequences,
        distinct_pairs: counts.pairs.len(),
        candidate_terms: by_term.len(),
        ..RoiMeta::default()
    };
    let mut entries = BTreeMap::new();
    for (term, pairs) in &by_term {
        match mine_term(term, pairs, &counts, &index, g, th) {
            Ok(e) => {
                entries.insert(term.to_string(), e);
            }
            Err(Rejection::NoValidPair) => meta.rejected_no_valid_pair += 1,
            Err(Rejection::Entropy) => meta.rejected_entropy += 1,
            Err(Rejection::Inconsistent) => meta.rejected_inconsistent += 1,
        }
    }
    meta.entries = entries.len();
    Ok(RoiStore { entries, meta })
}

fn meta_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".meta.json");
    PathBuf::from(s)
}

impl RoiStore {
    pub fn from_entries(entries: impl IntoIterator<Item = RoiEntry>) -> Self {
        let entries: BTreeMap<String, RoiEntry> = entries.into_iter().map(|e| (e.term.clone(), e)).collect();
        let meta = RoiMeta {
            entries: entries.len(),
            ..RoiMeta::default()
        };
        RoiStore { entries, meta }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, term: &str) -> Option<&RoiEntry> {
        self.entries.get(term)
    }

    pub fn entries(&self) -> impl Iterator<Item = &RoiEntry> {
        self.entries.values()
    }

    pub fn terms(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    /// Entries for every token that is an ROI term, in first-occurrence order.
    pub fn lookup<'a, I>(&self, tokens: I) -> Vec<&RoiEntry>
    where
        I: IntoIterator<Item = &'a str>,
    {
        let mut out: Vec<&RoiEntry> = Vec::new();
        for t in tokens {
            if let Some(e) = self.entries.get(t) {
                if !out.iter().any(|x| x.term == e.term) {
                    out.push(e);
                }
            }
        }
        out
    }

    /// The store as JSONL, one entry per line in term order.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for e in self.entries.values() {
            let row = EntryRow {
                term: e.term.clone(),
                path: [e.path.l1.clone(), e.path.l2.clone(), e.path.l3.clone()],
                entropy: e.entropy,
                support: e.support.clone(),
            };
            out.push_str(&serde_json::to_string(&row).expect("rows serialize"));
            out.push('\n');
        }
        out
    }

    /// Parses JSONL rows, resolving every path against `g`.
    pub fn from_jsonl(text: &str, g: &Gazetteer) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let err = |message: String| Error::Parse { line: i + 1, message };
            let row: EntryRow = serde_json::from_str(line).map_err(|e| err(e.to_string()))?;
            let [a, b, c] = &row.path;
            let named = AdPath::from_names([a.as_deref(), b.as_deref(), c.as_deref()]);
            let ids = g
                .resolve(&named)
                .filter(|_| named.is_prefix_form())
                .ok_or_else(|| err(format!("path {named} is not a gazetteer chain")))?;
            entries.insert(
                row.term.clone(),
                RoiEntry {
                    term: row.term,
                    path: g.path_from_ids(&ids),
                    entropy: row.entropy,
                    support: row.support,
                },
            );
        }
        let meta = RoiMeta {
            entries: entries.len(),
            ..RoiMeta::default()
        };
        Ok(RoiStore { entries, meta })
    }

    pub fn meta_json(&self) -> String {
        serde_json::to_string_pretty(&self.meta).expect("meta serializes") + "\n"
    }

    /// Writes the JSONL store and its `.meta.json` sidecar.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_jsonl()).map_err(|e| Error::io(path, e))?;
        let meta = meta_path(path);
        fs::write(&meta, self.meta_json()).map_err(|e| Error::io(&meta, e))
    }

    /// Loads a store, resolving every path against `g`. The sidecar is
    /// optional.
    pub fn load(path: impl AsRef<Path>, g: &Gazetteer) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut store = Self::from_jsonl(&text, g)?;
        let meta_file = meta_path(path);
        if meta_file.exists() {
            let text = fs::read_to_string(&meta_file).map_err(|e| Error::io(&meta_file, e))?;
            store.meta = serde_json::from_str(&text)?;
        }
        Ok(store)
    }
}
