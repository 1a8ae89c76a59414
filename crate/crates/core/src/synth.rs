//! Deterministic synthetic corpora.
//!
//! The landmark corpus is a set of short news-style documents about known
//! places. Each document mentions a landmark together with a random subset
//! of its administrative names, so the co-occurrence statistics mined from it
//! are controlled by the per-landmark mention rates below. The same
//! generator, with longer documents, backs the throughput benchmark.

use std::collections::HashMap;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::gazetteer::{Gazetteer, RecordId, LEVELS};
use crate::sequence::{GeoSequence, ItemKind, SeqItem};
use crate::textscan::Document;

/// A place word anchored to the division with `code`. `mention[k]` is the
/// probability that a document names level `k + 1` next to the landmark;
/// `sibling` the probability that the document mentions the deepest level
/// again in a separate passage.
#[derive(Clone, Copy, Debug)]
pub struct Landmark {
    pub term: &'static str,
    pub code: &'static str,
    pub mention: [f64; LEVELS],
    pub sibling: f64,
}

const fn lm(term: &'static str, code: &'static str, mention: [f64; LEVELS], sibling: f64) -> Landmark {
    Landmark {
        term,
        code,
        mention,
        sibling,
    }
}

pub const LANDMARKS: &[Landmark] = &[
    lm("颐和园", "110108", [0.1, 0.9, 0.15], 0.6),
    lm("中关村", "110108", [0.05, 0.35, 0.95], 0.2),
    lm("圆明园", "110108", [0.05, 0.35, 0.95], 0.3),
    lm("三里屯", "110105", [0.05, 0.35, 0.95], 0.2),
    lm("国贸", "110105", [0.05, 0.35, 0.95], 0.2),
    lm("故宫", "110101", [0.05, 0.35, 0.95], 0.2),
    lm("天安门", "110101", [0.05, 0.35, 0.95], 0.2),
    lm("陆家嘴", "310115", [0.05, 0.35, 0.95], 0.2),
    lm("迪士尼乐园", "310115", [0.05, 0.35, 0.95], 0.2),
    lm("外滩", "310101", [0.05, 0.35, 0.95], 0.2),
    lm("南京路", "310101", [0.05, 0.35, 0.95], 0.2),
    lm("解放碑", "500103", [0.05, 0.35, 0.95], 0.2),
    lm("洪崖洞", "500103", [0.05, 0.35, 0.95], 0.2),
    lm("内蒙古大兴安岭", "150100", [0.15, 0.95, 0.0], 0.0),
    lm("大召寺", "150102", [0.05, 0.35, 0.95], 0.2),
    lm("长影旧址", "220104", [0.05, 0.35, 0.95], 0.2),
    lm("南湖公园", "220102", [0.05, 0.35, 0.95], 0.2),
    lm("湖北经济学院", "420100", [0.15, 0.95, 0.0], 0.0),
    lm("东湖", "420111", [0.05, 0.35, 0.95], 0.2),
    lm("光谷", "420111", [0.05, 0.35, 0.95], 0.2),
    lm("江汉路", "420103", [0.05, 0.35, 0.95], 0.2),
    lm("古隆中", "420602", [0.05, 0.35, 0.95], 0.2),
    lm("承恩寺", "420625", [0.05, 0.35, 0.95], 0.2),
    lm("华为基地", "440300", [0.15, 0.95, 0.0], 0.0),
    lm("梧桐山", "440308", [0.05, 0.35, 0.95], 0.3),
    lm("大梅沙", "440308", [0.05, 0.35, 0.95], 0.2),
    lm("沙头角", "440308", [0.05, 0.35, 0.95], 0.2),
    lm("深圳湾公园", "440305", [0.05, 0.35, 0.95], 0.2),
    lm("莲花山公园", "440304", [0.05, 0.35, 0.95], 0.2),
    lm("大运中心", "440307", [0.05, 0.35, 0.95], 0.2),
    lm("天河体育中心", "440106", [0.05, 0.35, 0.95], 0.2),
    lm("越秀公园", "440104", [0.05, 0.35, 0.95], 0.2),
    lm("海口美兰国际机场", "460108", [0.05, 0.35, 0.95], 0.2),
    lm("成都双流国际机场", "510116", [0.05, 0.35, 0.95], 0.3),
    lm("武侯祠", "510107", [0.05, 0.35, 0.95], 0.2),
    lm("锦里", "510107", [0.05, 0.35, 0.95], 0.2),
    lm("十陵立交", "510112", [0.05, 0.35, 0.95], 0.2),
    lm("黔灵山公园", "520103", [0.05, 0.35, 0.95], 0.2),
    lm("泸沽湖", "530700", [0.15, 0.95, 0.0], 0.0),
    lm("玉龙雪山", "530700", [0.15, 0.95, 0.0], 0.0),
    lm("丽江古城", "530702", [0.05, 0.35, 0.95], 0.2),
    lm("翠湖", "530102", [0.05, 0.35, 0.95], 0.2),
    lm("罗布人村寨", "652823", [0.05, 0.35, 0.95], 0.2),
    lm("孔雀河", "652801", [0.05, 0.35, 0.95], 0.2),
];

/// A point of interest present in every city; never resolvable.
pub const UBIQUITOUS_POI: &str = "中国银行";
const POI_CITIES: &[&str] = &["440100", "510100", "420100", "530100", "520100"];

const OPENERS: &[&str] = &["", "", "日前，", "据悉，", "昨天，", "记者了解到，", "近日，"];

const PREDICATES: &[&str] = &[
    "迎来客流高峰",
    "周末人气火爆",
    "今日起恢复开放",
    "举办主题活动",
    "出现拥堵情况",
    "加强安全管理",
    "开展志愿服务",
    "发布最新公告",
    "吸引大量市民前往",
    "附近实施交通管制",
    "完成升级改造",
    "启用了无人机送餐业务",
];

const FILLERS: &[&str] = &[
    "现场秩序井然",
    "相关部门提醒市民注意出行安全",
    "不少网友表示非常期待",
    "工作人员介绍了具体安排",
    "天气晴好气温适宜",
    "预计高峰将持续到晚间",
    "活动吸引了众多家庭参与",
    "后续情况将持续关注",
    "有关负责人表示将进一步完善服务",
    "记者在现场看到排队的人不少",
];

/// Terms of the bundled location lexicon.
pub fn location_lexicon() -> Vec<&'static str> {
    let mut v: Vec<&str> = LANDMARKS.iter().map(|l| l.term).collect();
    v.push(UBIQUITOUS_POI);
    v
}

#[derive(Clone, Debug)]
pub struct CorpusParams {
    pub docs_per_landmark: usize,
    pub background_docs: usize,
    pub poi_docs_per_city: usize,
    /// Probability of an unrelated passage about another division.
    pub noise: f64,
    /// Extra filler sentences appended to every document.
    pub padding: std::ops::RangeInclusive<usize>,
}

impl Default for CorpusParams {
    fn default() -> Self {
        CorpusParams {
            docs_per_landmark: 24,
            background_docs: 240,
            poi_docs_per_city: 8,
            noise: 0.2,
            padding: 0..=1,
        }
    }
}

struct Writer<'g> {
    g: &'g Gazetteer,
    rng: ChaCha8Rng,
    districts: Vec<RecordId>,
}

impl<'g> Writer<'g> {
    fn new(g: &'g Gazetteer, seed: u64) -> Self {
        let districts = g.records().filter(|(_, r)| r.level == 3).map(|(id, _)| id).collect();
        Writer {
            g,
            rng: ChaCha8Rng::seed_from_u64(seed),
            districts,
        }
    }

    fn pick<'a, T>(&mut self, items: &'a [T]) -> &'a T {
        items.choose(&mut self.rng).expect("non-empty")
    }

    fn surface(&mut self, id: RecordId) -> String {
        let r = self.g.record(id);
        let surfaces: Vec<&str> = r.surfaces().collect();
        (*self.pick(&surfaces)).to_owned()
    }

    fn chain(&self, code: &str) -> [Option<RecordId>; LEVELS] {
        self.g
            .chain(self.g.by_code(code).expect("known code"))
            .expect("valid chain")
    }

    /// Joined surfaces of the chosen levels, skipping a level whose name
    /// repeats its parent's (municipalities).
    fn mention(&mut self, chain: &[Option<RecordId>; LEVELS], levels: [bool; LEVELS]) -> String {
        let mut out = String::new();
        for k in 0..LEVELS {
            let Some(id) = chain[k] else { continue };
            if !levels[k] {
                continue;
            }
            let dup = k > 0 && chain[k - 1].is_some_and(|p| self.g.record(p).name == self.g.record(id).name);
            if dup && levels[k - 1] {
                continue;
            }
            out.push_str(&self.surface(id));
        }
        out
    }

    fn filler(&mut self) -> String {
        format!("{}。", self.pick(FILLERS))
    }

    fn background_sentence(&mut self) -> String {
        let d = *self.pick(&self.districts.clone());
        let chain = self.g.chain(d).expect("valid chain");
        let loc = self.mention(&chain, [true, true, true]);
        let pred = self.pick(PREDICATES);
        format!("{}{loc}{pred}。", self.pick(OPENERS))
    }

    fn landmark_doc(&mut self, l: &Landmark, params: &CorpusParams) -> String {
        let chain = self.chain(l.code);
        let mut levels = [false; LEVELS];
        for k in 0..LEVELS {
            levels[k] = chain[k].is_some() && self.rng.random::<f64>() < l.mention[k];
        }
        if !levels.iter().any(|&b| b) {
            let deepest = (0..LEVELS).rev().find(|&k| l.mention[k] > 0.0).unwrap_or(0);
            levels[deepest] = true;
        }
        let loc = self.mention(&chain, levels);
        let peers: Vec<&Landmark> = LANDMARKS
            .iter()
            .filter(|o| o.code == l.code && o.term != l.term)
            .collect();
        let deepest = chain.iter().rev().flatten().next().copied().expect("non-empty chain");

        let mut text = String::new();
        text.push_str(self.pick(OPENERS));
        if self.rng.random_bool(0.5) {
            text.push_str(&format!("{loc}{}{}。", l.term, self.pick(PREDICATES)));
        } else {
            text.push_str(&format!("{loc}的{}{}。", l.term, self.pick(PREDICATES)));
        }
        if self.rng.random_bool(0.7) {
            if peers.is_empty() {
                let again = self.surface(deepest);
                text.push_str(&format!("{again}{}。", self.pick(PREDICATES)));
            } else {
                let other = self.pick(&peers).term;
                text.push_str(&format!("附近的{other}也{}。", self.pick(PREDICATES)));
            }
        }
        text.push_str(&self.filler());
        text.push_str(&self.filler());
        if chain[2].is_some() && !peers.is_empty() && self.rng.random::<f64>() < l.sibling {
            let parts = self.mention(&chain, [false, true, true]);
            let other = self.pick(&peers).term;
            text.push_str(&format!("{parts}{other}{}。", self.pick(PREDICATES)));
            text.push_str(&self.filler());
            text.push_str(&self.filler());
        }
        if self.rng.random::<f64>() < params.noise {
            text.push_str(&self.background_sentence());
        }
        let pad = self.rng.random_range(params.padding.clone());
        for _ in 0..pad {
            text.push_str(&self.filler());
        }
        text
    }

    fn poi_doc(&mut self, city_code: &str) -> String {
        let chain = self.chain(city_code);
        let loc = self.mention(&chain, [true, true, false]);
        format!(
            "{}{loc}{UBIQUITOUS_POI}{}。{}",
            self.pick(OPENERS),
            self.pick(PREDICATES),
            self.filler()
        )
    }

    fn background_doc(&mut self) -> String {
        let mut text = self.background_sentence();
        text.push_str(&self.filler());
        text
    }
}

/// The corpus the bundled artifacts are mined from.
pub fn landmark_corpus(g: &Gazetteer, seed: u64, params: &CorpusParams) -> Vec<Document> {
    let mut w = Writer::new(g, seed);
    let mut texts = Vec::new();
    for l in LANDMARKS {
        for _ in 0..params.docs_per_landmark {
            texts.push(w.landmark_doc(l, params));
        }
    }
    for _ in 0..params.background_docs {
        texts.push(w.background_doc());
    }
    for city in POI_CITIES {
        for _ in 0..params.poi_docs_per_city {
            texts.push(w.poi_doc(city));
        }
    }
    texts
        .into_iter()
        .enumerate()
        .map(|(i, t)| Document::new(format!("doc{i:05}"), t))
        .collect()
}

/// News-length documents (several hundred bytes each) totalling at least
/// `target_bytes`.
pub fn news_corpus(g: &Gazetteer, seed: u64, target_bytes: usize) -> Vec<Document> {
    let params = CorpusParams {
        padding: 4..=14,
        noise: 0.5,
        ..CorpusParams::default()
    };
    let mut w = Writer::new(g, seed);
    let mut docs = Vec::new();
    let mut bytes = 0;
    while bytes < target_bytes {
        let text = match w.rng.random_range(0..10) {
            0 => {
                let mut t = w.background_doc();
                for _ in 0..6 {
                    t.push_str(&w.filler());
                }
                t
            }
            _ => {
                let l = *w.pick(LANDMARKS);
                w.landmark_doc(&l, &params)
            }
        };
        bytes += text.len();
        docs.push(Document::new(format!("news{:07}", docs.len()), text));
    }
    docs
}

/// Province-local sequences over `provinces` x `divisions` synthetic
/// divisions. Returns the sequences and the province label of every
/// division token.
pub fn coherence_corpus(
    seed: u64,
    provinces: usize,
    divisions: usize,
    sequences_per_province: usize,
) -> (Vec<GeoSequence>, HashMap<String, String>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let province = |p: usize| format!("省{p:02}");
    let division = |p: usize, d: usize| format!("省{p:02}县{d:02}");
    let mut labels = HashMap::new();
    for p in 0..provinces {
        for d in 0..divisions {
            labels.insert(division(p, d), province(p));
        }
    }
    let mut seqs = Vec::new();
    for p in 0..provinces {
        for s in 0..sequences_per_province {
            let len = rng.random_range(4..=8);
            let mut items = vec![SeqItem {
                surface: province(p),
                kind: ItemKind::Ad,
            }];
            for _ in 1..len {
                items.push(SeqItem {
                    surface: division(p, rng.random_range(0..divisions)),
                    kind: ItemKind::Ad,
                });
            }
            seqs.push(GeoSequence {
                doc_id: format!("p{p:02}s{s:04}"),
                seq_index: 0,
                items,
            });
        }
    }
    (seqs, labels)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn landmarks_resolve() {
        let g = Gazetteer::bundled();
        for l in LANDMARKS {
            let id = g.by_code(l.code).unwrap_or_else(|| panic!("{}", l.code));
            let level = g.record(id).level as usize;
            assert!(l.mention[level..].iter().all(|&p| p == 0.0), "{}", l.term);
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let g = Gazetteer::bundled();
        let params = CorpusParams::default();
        let a = landmark_corpus(&g, 7, &params);
        assert_eq!(a, landmark_corpus(&g, 7, &params));
        assert_ne!(a, landmark_corpus(&g, 8, &params));
        assert!(a.iter().any(|d| d.text.contains("梧桐山")));
    }

    #[test]
    fn news_corpus_reaches_target() {
        let g = Gazetteer::bundled();
        let docs = news_corpus(&g, 1, 50_000);
        let bytes: usize = docs.iter().map(|d| d.text.len()).sum();
        assert!(bytes >= 50_000);
        assert!(bytes / docs.len() > 200);
    }

    #[test]
    fn coherence_labels() {
        let (seqs, labels) = coherence_corpus(3, 4, 10, 20);
        assert_eq!(labels.len(), 40);
        assert_eq!(seqs.len(), 80);
        for s in &seqs {
            let p = &s.items[0].surface;
            assert!(s.items[1..].iter().all(|i| &labels[&i.surface] == p));
        }
    }
}
