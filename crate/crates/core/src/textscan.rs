//! Sentence splitting and dictionary-driven token scanning.

use std::borrow::Cow;
use std::collections::HashMap;
use std::ops::Range;

use aho_corasick::{AhoCorasick, MatchKind};
use serde::{Deserialize, Serialize};
use unicode_normalization::{is_nfc_quick, IsNormalized, UnicodeNormalization};

use crate::gazetteer::{Gazetteer, RecordId};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub doc_id: String,
    pub text: String,
}

impl Document {
    pub fn new(doc_id: impl Into<String>, text: impl Into<String>) -> Self {
        Document {
            doc_id: doc_id.into(),
            text: text.into(),
        }
    }
}

/// Canonical composition; borrowed when the input is already NFC.
pub fn normalize_text(text: &str) -> Cow<'_, str> {
    match is_nfc_quick(text.chars()) {
        IsNormalized::Yes => Cow::Borrowed(text),
        _ => Cow::Owned(text.nfc().collect()),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum TokenKind {
    AdHit,
    LexiconWord,
    Other,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Token {
    pub surface: String,
    /// Byte offsets into the document text.
    pub start: usize,
    pub end: usize,
    pub kind: TokenKind,
    /// Matching gazetteer records; empty unless `kind` is `AdHit`.
    pub records: Vec<RecordId>,
}

impl Token {
    pub fn is_ad(&self) -> bool {
        self.kind == TokenKind::AdHit
    }

    pub fn byte_range(&self) -> Range<usize> {
        self.start..self.end
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Sentence {
    pub index: usize,
    /// Byte range in the document, trailing delimiters included.
    pub start: usize,
    pub end: usize,
    pub tokens: Vec<Token>,
}

impl Sentence {
    pub fn text<'t>(&self, doc_text: &'t str) -> &'t str {
        &doc_text[self.start..self.end]
    }

    pub fn ad_hits(&self) -> impl Iterator<Item = &Token> {
        self.tokens.iter().filter(|t| t.is_ad())
    }
}

pub const DEFAULT_DELIMITERS: &[char] = &['。', '！', '？', '!', '?', '；', ';', '\n'];

#[derive(Clone, Debug)]
pub struct SentenceSplitter {
    delimiters: Vec<char>,
}

impl Default for SentenceSplitter {
    fn default() -> Self {
        SentenceSplitter {
            delimiters: DEFAULT_DELIMITERS.to_vec(),
        }
    }
}

impl SentenceSplitter {
    pub fn new(delimiters: impl IntoIterator<Item = char>) -> Self {
        SentenceSplitter {
            delimiters: delimiters.into_iter().collect(),
        }
    }

    fn is_delim(&self, c: char) -> bool {
        self.delimiters.contains(&c)
    }

    /// Splits into sentences; each sentence keeps its run of trailing
    /// delimiters so the ranges tile the text exactly.
    pub fn split(&self, text: &str) -> Vec<Sentence> {
        let mut out = Vec::new();
        let mut start = 0;
        let mut in_delims = false;
        for (i, c) in text.char_indices() {
            let delim = self.is_delim(c);
            if in_delims && !delim {
                out.push(Sentence {
                    index: out.len(),
                    start,
                    end: i,
                    tokens: Vec::new(),
                });
                start = i;
            }
            in_delims = delim;
        }
        if start < text.len() {
            out.push(Sentence {
                index: out.len(),
                start,
                end: text.len(),
                tokens: Vec::new(),
            });
        }
        out
    }
}

pub fn split_sentences(doc: &Document) -> Vec<Sentence> {
    SentenceSplitter::default().split(&doc.text)
}

#[derive(Clone, Debug)]
struct Entry {
    surface: String,
    kind: TokenKind,
    records: Vec<RecordId>,
}

/// A compiled union lexicon: gazetteer surfaces plus arbitrary words,
/// matched leftmost-longest.
#[derive(Clone, Debug)]
pub struct Lexicon {
    matcher: AhoCorasick,
    entries: Vec<Entry>,
    splitter: SentenceSplitter,
}

#[derive(Default)]
pub struct LexiconBuilder {
    entries: Vec<Entry>,
    by_surface: HashMap<String, usize>,
    splitter: Option<SentenceSplitter>,
}

impl LexiconBuilder {
    pub fn gazetteer(mut self, g: &Gazetteer) -> Self {
        let mut surfaces: Vec<(&str, &[RecordId])> = g.surfaces().collect();
        surfaces.sort_unstable();
        for (s, ids) in surfaces {
            let idx = self.slot(s);
            let e = &mut self.entries[idx];
            e.kind = TokenKind::AdHit;
            e.records = ids.to_vec();
        }
        self
    }

    /// Adds plain lexicon words. Words that are also gazetteer surfaces stay AD hits.
    pub fn words<I, S>(mut self, words: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        for w in words {
            let w = w.as_ref();
            if !w.is_empty() {
                self.slot(w);
            }
        }
        self
    }

    pub fn splitter(mut self, splitter: SentenceSplitter) -> Self {
        self.splitter = Some(splitter);
        self
    }

    fn slot(&mut self, surface: &str) -> usize {
        let surface = normalize_text(surface).into_owned();
        if let Some(&i) = self.by_surface.get(&surface) {
            return i;
        }
        self.entries.push(Entry {
            surface: surface.clone(),
            kind: TokenKind::LexiconWord,
            records: Vec::new(),
        });
        self.by_surface.insert(surface, self.entries.len() - 1);
        self.entries.len() - 1
    }

    pub fn build(self) -> Lexicon {
        let matcher = AhoCorasick::builder()
            .match_kind(MatchKind::LeftmostLongest)
            .build(self.entries.iter().map(|e| e.surface.as_str()))
            .expect("lexicon patterns compile");
        Lexicon {
            matcher,
            entries: self.entries,
            splitter: self.splitter.unwrap_or_default(),
        }
    }
}

impl Lexicon {
    pub fn builder() -> LexiconBuilder {
        LexiconBuilder::default()
    }

    pub fn for_gazetteer(g: &Gazetteer) -> Self {
        Self::builder().gazetteer(g).build()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Tokens for `text[range]`: every lexicon match plus OTHER tokens for
    /// the gaps between them. Offsets are relative to `text`.
    pub fn scan_range(&self, text: &str, range: Range<usize>) -> Vec<Token> {
        let slice = &text[range.clone()];
        let base = range.start;
        let mut tokens = Vec::new();
        let mut cursor = 0;
        for m in self.matcher.find_iter(slice) {
            if m.start() > cursor {
                tokens.push(other(slice, base, cursor, m.start()));
            }
            let e = &self.entries[m.pattern().as_usize()];
            tokens.push(Token {
                surface: e.surface.clone(),
                start: base + m.start(),
                end: base + m.end(),
                kind: e.kind,
                records: e.records.clone(),
            });
            cursor = m.end();
        }
        if cursor < slice.len() {
            tokens.push(other(slice, base, cursor, slice.len()));
        }
        tokens
    }

    pub fn scan(&self, text: &str, sentence: &Sentence) -> Vec<Token> {
        self.scan_range(text, sentence.start..sentence.end)
    }

    /// Splits `text` into sentences and scans each one.
    pub fn scan_document(&self, text: &str) -> Vec<Sentence> {
        let mut sentences = self.splitter.split(text);
        for s in &mut sentences {
            s.tokens = self.scan_range(text, s.start..s.end);
        }
        sentences
    }
}

fn other(slice: &str, base: usize, start: usize, end: usize) -> Token {
    Token {
        surface: slice[start..end].to_owned(),
        start: base + start,
        end: base + end,
        kind: TokenKind::Other,
        records: Vec::new(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn texts(doc: &str, sentences: &[Sentence]) -> Vec<String> {
        sentences.iter().map(|s| s.text(doc).to_owned()).collect()
    }

    #[test]
    fn splits_on_delimiters() {
        let doc = Document::new("d", "甲。乙！丙");
        let s = split_sentences(&doc);
        assert_eq!(texts(&doc.text, &s), ["甲。", "乙！", "丙"]);
        assert!(split_sentences(&Document::new("d", "")).is_empty());
    }

    #[test]
    fn news_snippet_offsets() {
        let text = "四川航空3u8751成都至海口航班返航。安全落地成都双流国际机场！";
        let s = SentenceSplitter::default().split(text);
        assert_eq!(s.len(), 2);
        assert_eq!(s[0].start, 0);
        assert_eq!(s[0].end, s[1].start);
        assert_eq!(s[1].end, text.len());
        assert_eq!(&text[s[1].start..s[1].end], "安全落地成都双流国际机场！");
        assert_eq!(s.iter().map(|x| x.index).collect::<Vec<_>>(), [0, 1]);
    }

    #[test]
    fn delimiter_runs_stay_together() {
        let text = "甲。。\n乙";
        let s = SentenceSplitter::default().split(text);
        assert_eq!(texts(text, &s), ["甲。。\n", "乙"]);
    }

    #[test]
    fn ambiguous_hit_carries_all_records() {
        let g = Gazetteer::bundled();
        let lex = Lexicon::for_gazetteer(&g);
        let text = "北京朝阳群众";
        let tokens = lex.scan_range(text, 0..text.len());
        let hits: Vec<&Token> = tokens.iter().filter(|t| t.is_ad()).collect();
        assert_eq!(hits.len(), 2);
        assert_eq!(hits[0].surface, "北京");
        assert_eq!(hits[1].surface, "朝阳");
        assert_eq!(hits[1].records.len(), 2);
        assert_eq!(tokens.last().unwrap().kind, TokenKind::Other);
    }

    #[test]
    fn longest_match_wins() {
        let lex = Lexicon::builder().words(["襄阳", "襄阳市"]).build();
        let text = "在襄阳市";
        let tokens = lex.scan_range(text, 0..text.len());
        assert_eq!(tokens.len(), 2);
        assert_eq!(tokens[1].surface, "襄阳市");
    }

    #[test]
    fn miss_is_one_other_token() {
        let g = Gazetteer::bundled();
        let lex = Lexicon::for_gazetteer(&g);
        let text = "今天天气不错";
        let tokens = lex.scan_range(text, 0..text.len());
        assert_eq!(tokens.len(), 1);
        assert_eq!(tokens[0].kind, TokenKind::Other);
        assert_eq!(tokens[0].surface, text);
    }

    #[test]
    fn word_that_is_also_ad_stays_ad() {
        let g = Gazetteer::bundled();
        let lex = Lexicon::builder().words(["北京", "颐和园"]).gazetteer(&g).build();
        let text = "北京颐和园";
        let t = lex.scan_range(text, 0..text.len());
        assert_eq!(t[0].kind, TokenKind::AdHit);
        assert_eq!(t[1].kind, TokenKind::LexiconWord);
    }

    #[test]
    fn empty_lexicon_scans() {
        let lex = Lexicon::builder().build();
        let t = lex.scan_document("甲。乙");
        assert_eq!(t.len(), 2);
        assert!(t.iter().all(|s| s.tokens.len() == 1));
    }

    #[test]
    fn nfc_normalization() {
        let decomposed = "e\u{301}";
        assert_eq!(normalize_text(decomposed), "\u{e9}");
        assert!(matches!(normalize_text("北京"), Cow::Borrowed(_)));
    }

    const WORDS: &[&str] = &["北京", "北京市", "朝阳", "朝阳区", "京", "市", "阳区", "深圳", "鹏城"];

    proptest! {
        #[test]
        fn sentences_tile_text(text in "[甲乙。！？!?；;\n]{0,40}") {
            let s = SentenceSplitter::default().split(&text);
            let joined: String = s.iter().map(|x| x.text(&text)).collect();
            prop_assert_eq!(joined, text);
            for (i, x) in s.iter().enumerate() {
                prop_assert_eq!(x.index, i);
                prop_assert!(x.start < x.end);
            }
        }

        #[test]
        fn scan_tiles_and_is_leftmost_longest(parts in proptest::collection::vec(0usize..12, 0..20)) {
            let text: String = parts
                .iter()
                .map(|&i| WORDS.get(i).copied().unwrap_or("的"))
                .collect();
            let lex = Lexicon::builder().words(WORDS).build();
            let tokens = lex.scan_range(&text, 0..text.len());
            let mut cursor = 0;
            for t in &tokens {
                prop_assert_eq!(t.start, cursor);
                prop_assert!(t.end > t.start);
                prop_assert_eq!(&text[t.start..t.end], t.surface.as_str());
                cursor = t.end;
                if t.kind == TokenKind::LexiconWord {
                    // no longer word starts at the same position
                    for w in WORDS {
                        if text[t.start..].starts_with(w) {
                            prop_assert!(w.len() <= t.surface.len());
                        }
                    }
                }
            }
            prop_assert_eq!(cursor, text.len());
            prop_assert_eq!(tokens.clone(), lex.scan_range(&text, 0..text.len()));
        }
    }
}
