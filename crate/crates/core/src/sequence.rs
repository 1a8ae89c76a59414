//! Geographic sequence extraction.
//!
//! Every sentence containing an AD hit anchors a window of neighbouring
//! sentences. AD mentions and recognized location entities inside the
//! window are kept in text order. Overlapping windows are merged so no
//! mention is counted twice.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::ops::Range;
use std::path::Path;

use aho_corasick::{AhoCorasick, MatchKind};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gazetteer::Gazetteer;
use crate::textscan::{normalize_text, Document, Lexicon, SentenceSplitter};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ItemKind {
    #[serde(rename = "AD")]
    Ad,
    #[serde(rename = "GEO")]
    Geo,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeqItem {
    pub surface: String,
    pub kind: ItemKind,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeoSequence {
    pub doc_id: String,
    pub seq_index: usize,
    pub items: Vec<SeqItem>,
}

impl GeoSequence {
    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn tokens(&self) -> impl Iterator<Item = &str> {
        self.items.iter().map(|i| i.surface.as_str())
    }

    pub fn ad_names(&self) -> impl Iterator<Item = &str> {
        self.items
            .iter()
            .filter(|i| i.kind == ItemKind::Ad)
            .map(|i| i.surface.as_str())
    }

    pub fn geo_words(&self) -> impl Iterator<Item = &str> {
        self.items
            .iter()
            .filter(|i| i.kind == ItemKind::Geo)
            .map(|i| i.surface.as_str())
    }
}

/// Finds location entities in a sentence. Returned ranges are byte offsets
/// into `sentence`. Implementations must be deterministic.
pub trait EntityRecognizer: Send + Sync {
    fn recognize(&self, sentence: &str) -> Vec<Range<usize>>;
}

pub const DEFAULT_SUFFIXES: &[&str] = &[
    "山",
    "湖",
    "岛",
    "机场",
    "大学",
    "学院",
    "公园",
    "立交",
    "基地",
    "广场",
    "大桥",
    "景区",
    "古镇",
    "水库",
    "火车站",
    "高铁站",
];

/// Characters that never start or continue a suffix-pattern entity.
const STOP_CHARS: &str = "的在了是和与从到至去往于及等个这那把被有为也都就对向里上下中爬登游看来过我你他她它们说要";

/// Lexicon-plus-suffix recognizer.
///
/// Exact lexicon entries are matched first (leftmost-longest, alongside the
/// gazetteer surfaces so that AD names bound the heuristic). In the remaining
/// gaps a known suffix such as 山 or 机场 preceded by up to `max_prefix_chars`
/// CJK characters is reported as an entity.
pub struct LexiconRecognizer {
    matcher: AhoCorasick,
    /// Pattern ids below this bound are location-lexicon entries; the rest
    /// are gazetteer surfaces.
    lexicon_len: usize,
    suffixes: AhoCorasick,
    max_prefix_chars: usize,
}

impl LexiconRecognizer {
    pub fn new<I, S>(gazetteer: &Gazetteer, lexicon: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        Self::with_suffixes(gazetteer, lexicon, DEFAULT_SUFFIXES.iter().copied(), 4)
    }

    pub fn with_suffixes<I, S, J, T>(gazetteer: &Gazetteer, lexicon: I, suffixes: J, max_prefix_chars: usize) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
        J: IntoIterator<Item = T>,
        T: AsRef<str>,
    {
        let mut seen = HashSet::new();
        let mut patterns: Vec<String> = lexicon
            .into_iter()
            .map(|w| normalize_text(w.as_ref()).into_owned())
            .filter(|w| !w.is_empty() && seen.insert(w.clone()))
            .collect();
        let lexicon_len = patterns.len();
        let mut surfaces: Vec<&str> = gazetteer.surfaces().map(|(s, _)| s).collect();
        surfaces.sort_unstable();
        patterns.extend(surfaces.into_iter().filter(|s| !seen.contains(*s)).map(str::to_owned));
        let matcher = AhoCorasick::builder()
            .match_kind(MatchKind::LeftmostLongest)
            .build(&patterns)
            .expect("recognizer patterns compile");
        let suffixes = AhoCorasick::builder()
            .match_kind(MatchKind::LeftmostLongest)
            .build(suffixes.into_iter().map(|s| s.as_ref().to_owned()))
            .expect("suffix patterns compile");
        LexiconRecognizer {
            matcher,
            lexicon_len,
            suffixes,
            max_prefix_chars,
        }
    }

    fn suffix_entities(&self, sentence: &str, gap: Range<usize>, out: &mut Vec<Range<usize>>) {
        let text = &sentence[gap.clone()];
        let mut floor = 0;
        for m in self.suffixes.find_iter(text) {
            let mut begin = m.start();
            let mut taken = 0;
            for (i, c) in text[floor..m.start()].char_indices().rev() {
                if taken == self.max_prefix_chars || !is_cjk(c) || STOP_CHARS.contains(c) {
                    break;
                }
                begin = floor + i;
                taken += 1;
            }
            if taken > 0 {
                out.push(gap.start + begin..gap.start + m.end());
            }
            floor = m.end();
        }
    }
}

fn is_cjk(c: char) -> bool {
    matches!(c, '\u{4E00}'..='\u{9FFF}' | '\u{3400}'..='\u{4DBF}')
}

impl EntityRecognizer for LexiconRecognizer {
    fn recognize(&self, sentence: &str) -> Vec<Range<usize>> {
        let mut out = Vec::new();
        let mut cursor = 0;
        for m in self.matcher.find_iter(sentence) {
            if m.start() > cursor {
                self.suffix_entities(sentence, cursor..m.start(), &mut out);
            }
            if m.pattern().as_usize() < self.lexicon_len {
                out.push(m.start()..m.end());
            }
            cursor = m.end();
        }
        if cursor < sentence.len() {
            self.suffix_entities(sentence, cursor..sentence.len(), &mut out);
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExtractConfig {
    /// Sentences on each side of an anchor sentence included in its window.
    pub radius: usize,
    /// Sequences shorter than this are dropped.
    pub min_len: usize,
}

impl Default for ExtractConfig {
    fn default() -> Self {
        ExtractConfig { radius: 1, min_len: 3 }
    }
}

pub struct SequenceExtractor<'a> {
    gazetteer: &'a Gazetteer,
    lexicon: Lexicon,
    recognizer: Box<dyn EntityRecognizer + 'a>,
    config: ExtractConfig,
}

#[derive(Debug)]
struct Span {
    start: usize,
    end: usize,
    kind: ItemKind,
    surface: String,
}

impl<'a> SequenceExtractor<'a> {
    pub fn new(
        gazetteer: &'a Gazetteer,
        recognizer: Box<dyn EntityRecognizer + 'a>,
        config: ExtractConfig,
    ) -> Result<Self> {
        if config.min_len < 2 {
            return Err(Error::Config(format!("min_len must be >= 2, got {}", config.min_len)));
        }
        Ok(SequenceExtractor {
            gazetteer,
            lexicon: Lexicon::for_gazetteer(gazetteer),
            recognizer,
            config,
        })
    }

    pub fn with_splitter(mut self, splitter: SentenceSplitter) -> Self {
        self.lexicon = Lexicon::builder().gazetteer(self.gazetteer).splitter(splitter).build();
        self
    }

    /// Items of one sentence: AD hits and entities, resolved leftmost-longest.
    fn sentence_items(&self, text: &str, start: usize, end: usize, ad: &[(usize, usize, String)]) -> Vec<Span> {
        let sentence = &text[start..end];
        let mut spans: Vec<Span> = ad
            .iter()
            .map(|(s, e, name)| Span {
                start: *s,
                end: *e,
                kind: ItemKind::Ad,
                surface: name.clone(),
            })
            .collect();
        for r in self.recognizer.recognize(sentence) {
            let valid = r.start < r.end
                && r.end <= sentence.len()
                && sentence.is_char_boundary(r.start)
                && sentence.is_char_boundary(r.end);
            if valid {
                spans.push(Span {
                    start: start + r.start,
                    end: start + r.end,
                    kind: ItemKind::Geo,
                    surface: sentence[r.clone()].to_owned(),
                });
            }
        }
        spans.sort_by(|a, b| {
            a.start
                .cmp(&b.start)
                .then((b.end - b.start).cmp(&(a.end - a.start)))
                .then(a.kind.cmp(&b.kind))
        });
        let mut kept: Vec<Span> = Vec::with_capacity(spans.len());
        for s in spans {
            match kept.last() {
                Some(last) if s.start < last.end => {}
                _ => kept.push(s),
            }
        }
        kept
    }

    pub fn extract(&self, doc: &Document) -> Vec<GeoSequence> {
        let text = normalize_text(&doc.text);
        let sentences = self.lexicon.scan_document(&text);
        let per_sentence: Vec<Vec<Span>> = sentences
            .iter()
            .map(|s| {
                let ad: Vec<(usize, usize, String)> = s
                    .ad_hits()
                    .map(|t| {
                        let name = self.gazetteer.record(t.records[0]).name.clone();
                        (t.start, t.end, name)
                    })
                    .collect();
                self.sentence_items(&text, s.start, s.end, &ad)
            })
            .collect();

        let r = self.config.radius;
        let last = sentences.len().saturating_sub(1);
        let mut windows: Vec<(usize, usize)> = Vec::new();
        for (i, items) in per_sentence.iter().enumerate() {
            if !items.iter().any(|s| s.kind == ItemKind::Ad) {
                continue;
            }
            let (lo, hi) = (i.saturating_sub(r), (i + r).min(last));
            match windows.last_mut() {
                Some(w) if lo <= w.1 => w.1 = w.1.max(hi),
                _ => windows.push((lo, hi)),
            }
        }

        let mut out = Vec::new();
        for (lo, hi) in windows {
            let items: Vec<SeqItem> = per_sentence[lo..=hi]
                .iter()
                .flatten()
                .map(|s| SeqItem {
                    surface: s.surface.clone(),
                    kind: s.kind,
                })
                .collect();
            if items.len() >= self.config.min_len {
                out.push(GeoSequence {
                    doc_id: doc.doc_id.clone(),
                    seq_index: out.len(),
                    items,
                });
            }
        }
        out
    }

    /// Extracts from every document in parallel; output is ordered by
    /// `(doc_id, seq_index)`.
    pub fn extract_corpus(&self, docs: &[Document]) -> Vec<GeoSequence> {
        let mut all: Vec<GeoSequence> = docs.par_iter().flat_map_iter(|d| self.extract(d)).collect();
        all.sort_by(|a, b| a.doc_id.cmp(&b.doc_id).then(a.seq_index.cmp(&b.seq_index)));
        all
    }
}

pub fn extract_sequences(
    docs: &[Document],
    gazetteer: &Gazetteer,
    recognizer: Box<dyn EntityRecognizer + '_>,
    min_len: usize,
) -> Result<Vec<GeoSequence>> {
    let config = ExtractConfig {
        min_len,
        ..ExtractConfig::default()
    };
    Ok(SequenceExtractor::new(gazetteer, recognizer, config)?.extract_corpus(docs))
}

fn read_jsonl<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: i + 1,
            message: e.to_string(),
        })?);
    }
    Ok(out)
}

fn write_jsonl<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for row in rows {
        serde_json::to_writer(&mut w, row)?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_corpus(path: impl AsRef<Path>) -> Result<Vec<Document>> {
    read_jsonl(path.as_ref())
}

pub fn write_corpus(path: impl AsRef<Path>, docs: &[Document]) -> Result<()> {
    write_jsonl(path.as_ref(), docs)
}

pub fn read_sequences(path: impl AsRef<Path>) -> Result<Vec<GeoSequence>> {
    read_jsonl(path.as_ref())
}

pub fn write_sequences(path: impl AsRef<Path>, seqs: &[GeoSequence]) -> Result<()> {
    write_jsonl(path.as_ref(), seqs)
}
