//! Explicit-mention scoring of candidate hierarchies.
//!
//! Every AD hit is expanded to its full ancestor chain. Candidates matching
//! the most distinct levels survive, and each survivor accumulates, sentence
//! by sentence, its own mentions divided by one plus the number of unrelated
//! AD mentions in that sentence. Sentences that merely list many places
//! therefore contribute little.

use std::cmp::Ordering;
use std::collections::BTreeSet;

use serde::Serialize;

use crate::gazetteer::{AdPath, Gazetteer, RecordId, LEVELS};
use crate::textscan::{Sentence, Token};

/// A candidate hierarchy as record ids in level slots.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Candidate(pub [Option<RecordId>; LEVELS]);

impl Candidate {
    pub fn depth(&self) -> usize {
        (0..LEVELS).rev().find(|&k| self.0[k].is_some()).map_or(0, |k| k + 1)
    }

    pub fn contains(&self, id: RecordId) -> bool {
        self.0.contains(&Some(id))
    }

    /// True when this candidate matches a token, i.e. the token's records
    /// include one of the candidate's levels.
    pub fn matches(&self, token: &Token) -> bool {
        token.records.iter().any(|&r| self.contains(r))
    }

    /// True if `self` is a strict ancestor prefix of `other`.
    fn is_strict_prefix_of(&self, other: &Candidate) -> bool {
        let d = self.depth();
        d < other.depth() && (0..d).all(|k| self.0[k] == other.0[k])
    }

    pub fn path(&self, g: &Gazetteer) -> AdPath {
        g.path_from_ids(&self.0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CandidateScore {
    pub path: AdPath,
    #[serde(skip)]
    pub candidate: Candidate,
    pub level_hits: usize,
    pub weight: f64,
}

/// Every record hit anywhere in the document, sorted and deduplicated.
fn hit_set(sentences: &[Sentence]) -> Vec<RecordId> {
    let mut ids: Vec<RecordId> = sentences
        .iter()
        .flat_map(|s| s.ad_hits())
        .flat_map(|t| t.records.iter().copied())
        .collect();
    ids.sort_unstable();
    ids.dedup();
    ids
}

/// Expands every AD hit to its ancestor chain. Chains that are strict
/// prefixes of another candidate are merged into it.
pub fn collect_candidates(sentences: &[Sentence], g: &Gazetteer) -> Vec<Candidate> {
    let mut all = BTreeSet::new();
    for id in hit_set(sentences) {
        if let Ok(chain) = g.chain(id) {
            all.insert(Candidate(chain));
        }
    }
    let all: Vec<Candidate> = all.into_iter().collect();
    all.iter()
        .filter(|c| !all.iter().any(|o| c.is_strict_prefix_of(o)))
        .copied()
        .collect()
}

fn levels_hit(candidate: &Candidate, hits: &[RecordId]) -> usize {
    candidate
        .0
        .iter()
        .flatten()
        .filter(|id| hits.binary_search(id).is_ok())
        .count()
}

/// Number of distinct levels of `candidate` that appear as an AD hit
/// anywhere in the document. One surface may confirm several levels (the
/// self-named municipality records).
pub fn count_level(sentences: &[Sentence], candidate: &Candidate) -> usize {
    levels_hit(candidate, &hit_set(sentences))
}

/// Per-sentence increment: mentions of the candidate divided by one plus
/// the number of other AD mentions.
pub fn sentence_increment(sentence: &Sentence, candidate: &Candidate) -> f64 {
    let (mut own, mut other) = (0usize, 0usize);
    for t in sentence.ad_hits() {
        if candidate.matches(t) {
            own += 1;
        } else {
            other += 1;
        }
    }
    own as f64 / (1 + other) as f64
}

pub fn weigh(sentences: &[Sentence], candidate: &Candidate) -> f64 {
    sentences.iter().map(|s| sentence_increment(s, candidate)).sum()
}

/// Keeps the candidates with the maximal level count and weighs them.
pub fn score_candidates(sentences: &[Sentence], candidates: &[Candidate], g: &Gazetteer) -> Vec<CandidateScore> {
    let hits = hit_set(sentences);
    let counted: Vec<(Candidate, usize)> = candidates.iter().map(|c| (*c, levels_hit(c, &hits))).collect();
    let Some(max) = counted.iter().map(|(_, n)| *n).max() else {
        return Vec::new();
    };
    counted
        .into_iter()
        .filter(|(_, n)| *n == max)
        .map(|(c, level_hits)| CandidateScore {
            path: c.path(g),
            candidate: c,
            level_hits,
            weight: weigh(sentences, &c),
        })
        .collect()
}

/// Deepest level of `candidate` confirmed by an explicit hit; every level
/// above it is confirmed transitively.
fn confirmed_depth(candidate: &Candidate, hits: &[RecordId]) -> usize {
    (0..LEVELS)
        .rev()
        .find(|&k| candidate.0[k].is_some_and(|id| hits.binary_search(&id).is_ok()))
        .map_or(0, |k| k + 1)
}

/// Full scoring outcome, kept for provenance and debugging.
#[derive(Clone, Debug, Serialize)]
pub struct ConfidenceOutcome {
    pub path: AdPath,
    pub scores: Vec<CandidateScore>,
}

pub fn evaluate(sentences: &[Sentence], g: &Gazetteer) -> ConfidenceOutcome {
    let candidates = collect_candidates(sentences, g);
    let scores = score_candidates(sentences, &candidates, g);
    let hits = hit_set(sentences);
    let best = scores.iter().max_by(|a, b| {
        a.weight
            .partial_cmp(&b.weight)
            .unwrap_or(Ordering::Equal)
            .then_with(|| confirmed_depth(&a.candidate, &hits).cmp(&confirmed_depth(&b.candidate, &hits)))
            // smaller code triple wins, so reverse
            .then_with(|| b.candidate.cmp(&a.candidate))
    });
    let path = match best {
        Some(s) => s.path.truncated(confirmed_depth(&s.candidate, &hits)),
        None => AdPath::empty(),
    };
    ConfidenceOutcome { path, scores }
}

/// The Confidence path for a scanned document.
pub fn confidence(sentences: &[Sentence], g: &Gazetteer) -> AdPath {
    evaluate(sentences, g).path
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::textscan::Lexicon;
    use proptest::prelude::*;

    fn scan(text: &str) -> (Gazetteer, Vec<Sentence>) {
        let g = Gazetteer::bundled();
        let s = Lexicon::for_gazetteer(&g).scan_document(text);
        (g, s)
    }

    fn cand(g: &Gazetteer, code: &str) -> Candidate {
        Candidate(g.chain(g.by_code(code).unwrap()).unwrap())
    }

    #[test]
    fn chaoyang_alone_gives_two_candidates() {
        let (g, s) = scan("朝阳群众又立功了。");
        let c = collect_candidates(&s, &g);
        assert_eq!(c.len(), 2);
        assert_eq!(c[0], cand(&g, "110105"));
        assert_eq!(c[1], cand(&g, "220104"));
    }

    #[test]
    fn no_hits_no_candidates() {
        let (g, s) = scan("今天天气不错。");
        assert!(collect_candidates(&s, &g).is_empty());
        assert_eq!(confidence(&s, &g), AdPath::empty());
    }

    #[test]
    fn prefix_chains_collapse() {
        let (g, s) = scan("巴音郭楞蒙古自治州尉犁县发现古城遗址。");
        let c = collect_candidates(&s, &g);
        assert_eq!(c, [cand(&g, "652823")]);
    }

    #[test]
    fn count_level_cases() {
        let (g, s) = scan("北京朝阳公园。");
        assert_eq!(count_level(&s, &cand(&g, "110105")), 3);
        assert_eq!(count_level(&s, &cand(&g, "220104")), 1);

        let (g, s) = scan("朝阳的早晨。");
        assert_eq!(count_level(&s, &cand(&g, "110105")), 1);
        assert_eq!(count_level(&s, &cand(&g, "220104")), 1);
    }

    #[test]
    fn address_listing_penalty() {
        let text = "青少年橄榄球天行联赛总决赛在上海森兰体育公园举行。由来自北京、上海、深圳、重庆、贵阳等地的青少年选手组成的队伍参赛。";
        let (g, s) = scan(text);
        let shanghai = cand(&g, "310100");
        assert_eq!(sentence_increment(&s[1], &shanghai), 1.0 / 5.0);
        assert_eq!(sentence_increment(&s[0], &shanghai), 1.0);
    }

    #[test]
    fn unpenalised_single_mention() {
        let (g, s) = scan("襄阳的牛肉面很好吃。");
        assert_eq!(sentence_increment(&s[0], &cand(&g, "420600")), 1.0);
    }

    #[test]
    fn level_filter_discards_shallower_evidence() {
        let (g, s) = scan("湖北武汉。朝阳。");
        let cands = [cand(&g, "420100"), cand(&g, "220104")];
        let scored = score_candidates(&s, &cands, &g);
        assert_eq!(scored.len(), 1);
        assert_eq!(scored[0].level_hits, 2);
        assert_eq!(scored[0].path.l2.as_deref(), Some("武汉市"));
    }

    #[test]
    fn xinjiang_filled_transitively() {
        let (g, s) = scan("巴音郭楞蒙古自治州尉犁县发现古城遗址。");
        let p = confidence(&s, &g);
        assert_eq!(
            p.names(),
            [Some("新疆维吾尔自治区"), Some("巴音郭楞蒙古自治州"), Some("尉犁县")]
        );
    }

    #[test]
    fn beijing_disambiguates_chaoyang() {
        let (g, s) = scan("北京今天有雨。朝阳公园人很多。");
        let p = confidence(&s, &g);
        assert_eq!(p.names(), [Some("北京市"), Some("北京市"), Some("朝阳区")]);
        assert_eq!(p.code(2), Some("110105"));
    }

    #[test]
    fn frequent_candidate_wins() {
        let text = "武汉开会。武汉下雨。襄阳晴。武汉堵车。湖北发布通知。";
        let (g, s) = scan(text);
        let p = confidence(&s, &g);
        assert_eq!(p.names(), [Some("湖北省"), Some("武汉市"), None]);
        let scores = score_candidates(&s, &collect_candidates(&s, &g), &g);
        let w = |name: &str| {
            scores
                .iter()
                .find(|c| c.path.l2.as_deref() == Some(name))
                .unwrap()
                .weight
        };
        // 3 武汉 sentences + the 湖北 sentence for both candidates
        assert_eq!(w("武汉市"), 4.0);
        assert_eq!(w("襄阳市"), 2.0);
    }

    const SURFACES: &[&str] = &["北京", "朝阳", "长春", "吉林", "深圳", "盐田", "广东", "的", "了"];

    fn doc_strategy() -> impl Strategy<Value = String> {
        proptest::collection::vec(proptest::collection::vec(0..SURFACES.len(), 1..6), 1..6).prop_map(|sents| {
            sents
                .into_iter()
                .map(|w| w.into_iter().map(|i| SURFACES[i]).collect::<String>() + "。")
                .collect()
        })
    }

    proptest! {
        #[test]
        fn increment_decreases_with_other_mentions(extra in 0usize..6) {
            let g = Gazetteer::bundled();
            let lex = Lexicon::for_gazetteer(&g);
            let base = "盐田".to_string();
            let noisy = base.clone() + &"北京".repeat(extra);
            let noisier = noisy.clone() + "重庆";
            let c = cand(&g, "440308");
            let a = sentence_increment(&lex.scan_document(&noisy)[0], &c);
            let b = sentence_increment(&lex.scan_document(&noisier)[0], &c);
            prop_assert!(b < a);
        }

        #[test]
        fn adding_own_sentence_is_monotone(text in doc_strategy()) {
            let g = Gazetteer::bundled();
            let lex = Lexicon::for_gazetteer(&g);
            let before = lex.scan_document(&text);
            let after = lex.scan_document(&(text.clone() + "盐田深圳。"));
            let a = cand(&g, "440308");
            let other = cand(&g, "110105");
            prop_assert!(weigh(&after, &a) >= weigh(&before, &a));
            prop_assert!(weigh(&after, &other) <= weigh(&before, &other));
        }

        #[test]
        fn result_independent_of_candidate_order(text in doc_strategy()) {
            let g = Gazetteer::bundled();
            let s = Lexicon::for_gazetteer(&g).scan_document(&text);
            let mut cands = collect_candidates(&s, &g);
            let forward = score_candidates(&s, &cands, &g);
            cands.reverse();
            let mut backward = score_candidates(&s, &cands, &g);
            backward.reverse();
            prop_assert_eq!(forward, backward);
            let p = confidence(&s, &g);
            prop_assert!(g.validates(&p) || p.is_empty());
            prop_assert_eq!(p, confidence(&s, &g));
        }
    }
}
