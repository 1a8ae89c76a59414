//! Brute-force reference implementations and random inputs shared by the
//! integration tests. Nothing here calls the code under test except for
//! read-only gazetteer accessors.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, HashMap};

use geonorm::sequence::{GeoSequence, ItemKind, SeqItem};
use geonorm::{AdRecord, Gazetteer};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// 50 records: four provinces (one a municipality), twelve prefectures and
/// 34 counties. County names repeat across prefectures and several aliases
/// are shared, so many surfaces are ambiguous.
pub fn ambiguous_gazetteer() -> Gazetteer {
    let mut rows: Vec<AdRecord> = Vec::new();
    let rec = |code: String, name: &str, aliases: &[&str], level: u8, parent: Option<String>| AdRecord {
        code,
        name: name.to_owned(),
        aliases: aliases.iter().map(|a| a.to_string()).collect(),
        level,
        parent_code: parent,
    };
    let provinces = [("甲省", "甲"), ("乙省", "乙"), ("丙省", "丙"), ("丁市", "丁")];
    let cities = [
        [("东安市", "东安"), ("西平市", "西平"), ("南阳市", "南阳")],
        [("北川市", "北川"), ("东安州", "东安"), ("长宁市", "长宁")],
        [("永和市", "永和"), ("长安市", "长安"), ("新华市", "新华")],
        [("丁市", "丁"), ("", ""), ("", "")],
    ];
    let counties = [
        "新华区",
        "城关区",
        "长安区",
        "江北区",
        "河西区",
        "平安县",
        "新华区",
        "城关区",
        "永兴县",
        "长安区",
        "江北区",
        "河东区",
        "新华区",
        "安定县",
        "城关区",
        "长宁县",
        "东安区",
        "平安县",
        "新华区",
        "江北区",
        "长安区",
        "河西区",
        "城关区",
        "和平区",
        "新华区",
        "西平县",
        "南山区",
        "城关区",
        "长安区",
        "江北区",
        "新华区",
        "北川县",
        "平安县",
        "河东区",
    ];
    let mut next_county = 0;
    for (p, (pname, palias)) in provinces.iter().enumerate() {
        let pcode = format!("{}0000", 11 + p);
        rows.push(rec(pcode.clone(), pname, &[palias], 1, None));
        let city_list: Vec<_> = cities[p].iter().filter(|c| !c.0.is_empty()).collect();
        for (c, (cname, calias)) in city_list.iter().enumerate() {
            let ccode = format!("{}{:02}00", 11 + p, c + 1);
            rows.push(rec(ccode.clone(), cname, &[calias], 2, Some(pcode.clone())));
        }
    }
    // Distribute counties over the prefectures in order until 50 records.
    let city_codes: Vec<String> = rows.iter().filter(|r| r.level == 2).map(|r| r.code.clone()).collect();
    let mut per_city: HashMap<String, usize> = HashMap::new();
    let mut ci = 0;
    while rows.len() < 50 {
        let ccode = &city_codes[ci % city_codes.len()];
        let name = counties[next_county % counties.len()];
        next_county += 1;
        ci += 1;
        let taken = rows
            .iter()
            .any(|r| r.parent_code.as_deref() == Some(ccode.as_str()) && r.name == name);
        if taken {
            continue;
        }
        let n = per_city.entry(ccode.clone()).or_default();
        *n += 1;
        let code = format!("{}{:02}", &ccode[..4], *n);
        let alias = name.trim_end_matches(['区', '县']);
        rows.push(rec(code, name, &[alias], 3, Some(ccode.clone())));
    }
    Gazetteer::from_records(rows).expect("synthetic gazetteer is valid")
}

/// Random documents of 1..=10 sentences mentioning up to five divisions.
pub fn random_documents(g: &Gazetteer, n: usize, seed: u64) -> Vec<String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ids: Vec<_> = g.records().map(|(id, _)| id).collect();
    let filler = ["的", "在", "了", "和", "发布", "会议", "今天", "居民"];
    (0..n)
        .map(|_| {
            let k = rng.random_range(1..=5);
            let picked: Vec<_> = ids.choose_multiple(&mut rng, k).copied().collect();
            let mut pool: Vec<String> = Vec::new();
            for &id in &picked {
                for level in g.chain(id).unwrap().iter().flatten() {
                    pool.extend(g.record(*level).surfaces().map(str::to_owned));
                }
            }
            let mut text = String::new();
            for _ in 0..rng.random_range(1..=10) {
                for _ in 0..rng.random_range(0..=4) {
                    text.push_str(filler.choose(&mut rng).unwrap());
                    if rng.random_bool(0.8) {
                        text.push_str(pool.choose(&mut rng).unwrap());
                    }
                }
                text.push('。');
            }
            text
        })
        .collect()
}

type Chain = [Option<usize>; 3];

fn chain_of(g: &Gazetteer, idx: usize) -> Chain {
    let records: Vec<&AdRecord> = g.records().map(|(_, r)| r).collect();
    let mut out = [None; 3];
    let mut cur = Some(idx);
    while let Some(i) = cur {
        let r = records[i];
        out[r.level as usize - 1] = Some(i);
        cur = r
            .parent_code
            .as_ref()
            .and_then(|p| records.iter().position(|x| &x.code == p));
    }
    out
}

/// Straight reading of the confidence scoring loop: naive leftmost-longest
/// scan, parent walks, exhaustive scoring. Returns level names.
pub fn confidence_oracle(g: &Gazetteer, text: &str) -> [Option<String>; 3] {
    let records: Vec<&AdRecord> = g.records().map(|(_, r)| r).collect();
    let mut surfaces: Vec<(String, Vec<usize>)> = Vec::new();
    for (i, r) in records.iter().enumerate() {
        for s in std::iter::once(&r.name).chain(&r.aliases) {
            match surfaces.iter_mut().find(|(x, _)| x == s) {
                Some((_, v)) => {
                    if !v.contains(&i) {
                        v.push(i)
                    }
                }
                None => surfaces.push((s.clone(), vec![i])),
            }
        }
    }

    // sentence -> list of hit record sets
    let mut sentences: Vec<Vec<Vec<usize>>> = Vec::new();
    for sentence in text.split_inclusive('。') {
        let chars: Vec<(usize, char)> = sentence.char_indices().collect();
        let mut hits = Vec::new();
        let mut i = 0;
        while i < chars.len() {
            let rest = &sentence[chars[i].0..];
            let best = surfaces
                .iter()
                .filter(|(s, _)| rest.starts_with(s.as_str()))
                .max_by_key(|(s, _)| s.len());
            match best {
                Some((s, ids)) => {
                    hits.push(ids.clone());
                    i += s.chars().count();
                }
                None => i += 1,
            }
        }
        sentences.push(hits);
    }

    let all_hits: BTreeSet<usize> = sentences.iter().flatten().flatten().copied().collect();
    let mut cands: BTreeSet<Chain> = all_hits.iter().map(|&i| chain_of(g, i)).collect();
    let depth = |c: &Chain| c.iter().filter(|x| x.is_some()).count();
    let snapshot: Vec<Chain> = cands.iter().copied().collect();
    cands.retain(|c| {
        !snapshot
            .iter()
            .any(|o| depth(c) < depth(o) && (0..depth(c)).all(|k| c[k] == o[k]))
    });
    if cands.is_empty() {
        return [None, None, None];
    }
    let count = |c: &Chain| c.iter().flatten().filter(|i| all_hits.contains(i)).count();
    let max = cands.iter().map(count).max().unwrap();
    let confirmed = |c: &Chain| {
        (0..3)
            .rev()
            .find(|&k| c[k].is_some_and(|i| all_hits.contains(&i)))
            .map_or(0, |k| k + 1)
    };
    let weight = |c: &Chain| {
        let mut w = 0.0;
        for s in &sentences {
            let own = s.iter().filter(|h| h.iter().any(|i| c.contains(&Some(*i)))).count();
            w += own as f64 / (1 + s.len() - own) as f64;
        }
        w
    };
    let codes = |c: &Chain| -> Vec<Option<String>> { c.iter().map(|x| x.map(|i| records[i].code.clone())).collect() };
    let mut best: Option<(Chain, f64)> = None;
    for c in cands.iter().filter(|c| count(c) == max) {
        let w = weight(c);
        let better = match &best {
            None => true,
            Some((b, bw)) => {
                w > *bw
                    || (w == *bw && confirmed(c) > confirmed(b))
                    || (w == *bw && confirmed(c) == confirmed(b) && codes(c) < codes(b))
            }
        };
        if better {
            best = Some((*c, w));
        }
    }
    let (c, _) = best.unwrap();
    let d = confirmed(&c);
    let mut out = [None, None, None];
    for k in 0..d {
        out[k] = c[k].map(|i| records[i].name.clone());
    }
    out
}

/// Mined entry as `(path names, entropy, [(ad, g)])`.
pub type OracleEntry = ([Option<String>; 3], f64, Vec<(String, f64)>);

/// Exhaustive evaluation of the ROI mining formulas with default thresholds.
pub fn roi_oracle(g: &Gazetteer, seqs: &[GeoSequence]) -> BTreeMap<String, OracleEntry> {
    let records: Vec<&AdRecord> = g.records().map(|(_, r)| r).collect();
    let n = seqs.len() as f64;
    let has = |s: &GeoSequence, w: &str, kind: ItemKind| s.items.iter().any(|i| i.kind == kind && i.surface == w);
    let mut terms: BTreeSet<&str> = BTreeSet::new();
    let mut ads: BTreeSet<&str> = BTreeSet::new();
    for s in seqs {
        for i in &s.items {
            match i.kind {
                ItemKind::Geo => terms.insert(i.surface.as_str()),
                ItemKind::Ad => ads.insert(i.surface.as_str()),
            };
        }
    }
    let named = |name: &str| -> Vec<usize> {
        let exact: Vec<usize> = (0..records.len()).filter(|&i| records[i].name == name).collect();
        if !exact.is_empty() {
            return exact;
        }
        (0..records.len())
            .filter(|&i| records[i].aliases.iter().any(|a| a == name))
            .collect()
    };
    let is_parent = |p: &str, c: &str| {
        let ps = named(p);
        named(c).iter().any(|&ci| {
            records[ci]
                .parent_code
                .as_ref()
                .is_some_and(|pc| ps.iter().any(|&pi| &records[pi].code == pc))
        })
    };

    let mut out = BTreeMap::new();
    for &t in &terms {
        let mut scored: Vec<(String, f64)> = Vec::new();
        for &a in &ads {
            let count = seqs
                .iter()
                .filter(|s| has(s, t, ItemKind::Geo) && has(s, a, ItemKind::Ad))
                .count();
            if count == 0 {
                continue;
            }
            let df = seqs.iter().filter(|s| has(s, a, ItemKind::Ad)).count();
            let score = count as f64 * (n / (1.0 + df as f64)).ln();
            if score >= 1.0 {
                scored.push((a.to_owned(), score));
            }
        }
        if scored.is_empty() {
            continue;
        }
        let sort = |v: &mut Vec<(String, f64)>| v.sort_by(|x, y| y.1.partial_cmp(&x.1).unwrap().then(x.0.cmp(&y.0)));
        sort(&mut scored);
        let total: f64 = scored.iter().map(|x| x.1).sum();
        let e = -scored.iter().map(|x| x.1 / total).map(|p| p * p.ln()).sum::<f64>();
        if e > 1.0 {
            continue;
        }
        let mut adjusted = scored.clone();
        for i in 1..scored.len() {
            let child = &scored[i].0;
            let Some(parent) = scored[..i].iter().map(|x| &x.0).find(|p| is_parent(p, child)) else {
                continue;
            };
            let mut num = 0;
            let mut den = 0;
            for s in seqs {
                if has(s, parent, ItemKind::Ad) && !has(s, child, ItemKind::Ad) {
                    den += 1;
                    if seqs.iter().any(|o| o.doc_id == s.doc_id && has(o, child, ItemKind::Ad)) {
                        num += 1;
                    }
                }
            }
            if num > 0 && den > 0 {
                adjusted[i].1 = scored[i].1 * den as f64 / num as f64;
            }
        }
        sort(&mut adjusted);
        let top = adjusted[0].1;
        let kept: Vec<(String, f64)> = adjusted.into_iter().filter(|x| x.1 >= top / 10.0).take(3).collect();

        // every assignment of records to names that forms a single chain
        let options: Vec<Vec<usize>> = kept.iter().map(|(a, _)| named(a)).collect();
        let mut chains: Vec<Chain> = Vec::new();
        let mut choose = vec![0usize; options.len()];
        'outer: loop {
            let mut merged: Chain = [None; 3];
            let mut ok = true;
            for (k, &c) in choose.iter().enumerate() {
                let ch = chain_of(g, options[k][c]);
                for l in 0..3 {
                    match (merged[l], ch[l]) {
                        (Some(x), Some(y)) if x != y => ok = false,
                        (None, Some(y)) => merged[l] = Some(y),
                        _ => {}
                    }
                }
            }
            // merged must itself be a prefix-form chain
            let d = merged.iter().rposition(Option::is_some).map_or(0, |k| k + 1);
            if ok && (0..d).all(|l| merged[l].is_some()) && merged[..d].iter().flatten().count() == d {
                if let Some(leaf) = merged[..d].last().copied().flatten() {
                    if chain_of(g, leaf) == merged && !chains.contains(&merged) {
                        chains.push(merged);
                    }
                }
            }
            for k in 0..choose.len() {
                choose[k] += 1;
                if choose[k] < options[k].len() {
                    continue 'outer;
                }
                choose[k] = 0;
            }
            break;
        }
        let deepest = chains.iter().max_by_key(|c| c.iter().flatten().count()).copied();
        let Some(deepest) = deepest else { continue };
        let all_on_it = chains
            .iter()
            .all(|c| (0..3).all(|l| c[l].is_none() || c[l] == deepest[l]));
        if !all_on_it {
            continue;
        }
        let names = deepest.map(|x| x.map(|i| records[i].name.clone()));
        out.insert(t.to_owned(), (names, e, kept));
    }
    out
}

/// Random small sequence sets over real gazetteer names plus a few geo words.
pub fn random_sequence_set(g: &Gazetteer, seed: u64) -> Vec<GeoSequence> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let names: Vec<String> = {
        let mut v: Vec<String> = g.records().map(|(_, r)| r.name.clone()).collect();
        v.sort();
        v.dedup();
        // favour one province so chains and reweighting occur
        let focus: Vec<String> = v
            .iter()
            .filter(|n| ["北京市", "海淀区", "朝阳区", "广东省", "深圳市", "盐田区", "南山区"].contains(&n.as_str()))
            .cloned()
            .collect();
        focus.into_iter().chain(v.into_iter().take(6)).collect()
    };
    let words = ["颐和园", "梧桐山", "中国银行", "华为基地"];
    let n = rng.random_range(1..=20);
    let docs = rng.random_range(1..=n.min(6));
    (0..n)
        .map(|i| {
            let mut items = Vec::new();
            for _ in 0..rng.random_range(1..=5) {
                items.push(SeqItem {
                    surface: names.choose(&mut rng).unwrap().clone(),
                    kind: ItemKind::Ad,
                });
            }
            for _ in 0..rng.random_range(0..=2) {
                items.push(SeqItem {
                    surface: words.choose(&mut rng).unwrap().to_string(),
                    kind: ItemKind::Geo,
                });
            }
            GeoSequence {
                doc_id: format!("d{}", rng.random_range(0..docs)),
                seq_index: i,
                items,
            }
        })
        .collect()
}
