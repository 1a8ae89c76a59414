//! The administrative-division database.
//!
//! Records form a forest of depth at most three: provinces (level 1),
//! prefecture-level cities (level 2) and counties/districts (level 3).
//! Municipalities such as 北京市 carry an explicit self-named level-2
//! record so every complete path has exactly three slots.

use std::collections::HashMap;
use std::fmt;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use unicode_normalization::UnicodeNormalization;

use crate::error::{Error, Result};

/// Number of hierarchy levels handled.
pub const LEVELS: usize = 3;

/// Dense handle to a record. Ids are assigned in code order, so comparing
/// ids compares codes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RecordId(u32);

impl RecordId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdRecord {
    pub code: String,
    pub name: String,
    #[serde(default)]
    pub aliases: Vec<String>,
    pub level: u8,
    #[serde(default, alias = "parent")]
    pub parent_code: Option<String>,
}

impl AdRecord {
    /// Standard name followed by aliases, without duplicates.
    pub fn surfaces(&self) -> impl Iterator<Item = &str> {
        std::iter::once(self.name.as_str())
            .chain(self.aliases.iter().map(String::as_str).filter(move |a| *a != self.name))
    }
}

/// A possibly partial `[l1, l2, l3]` hierarchy with the parallel code triple.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct AdPath {
    pub l1: Option<String>,
    pub l2: Option<String>,
    pub l3: Option<String>,
    #[serde(default)]
    pub codes: [Option<String>; LEVELS],
}

impl AdPath {
    pub fn empty() -> Self {
        Self::default()
    }

    /// Builds a path from names only (codes unknown), e.g. for gold labels.
    pub fn from_names(names: [Option<&str>; LEVELS]) -> Self {
        let [l1, l2, l3] = names.map(|n| n.map(str::to_owned));
        AdPath {
            l1,
            l2,
            l3,
            codes: Default::default(),
        }
    }

    pub fn name(&self, level: usize) -> Option<&str> {
        match level {
            0 => self.l1.as_deref(),
            1 => self.l2.as_deref(),
            2 => self.l3.as_deref(),
            _ => None,
        }
    }

    pub fn code(&self, level: usize) -> Option<&str> {
        self.codes.get(level).and_then(|c| c.as_deref())
    }

    pub fn names(&self) -> [Option<&str>; LEVELS] {
        [self.name(0), self.name(1), self.name(2)]
    }

    fn slot_mut(&mut self, level: usize) -> &mut Option<String> {
        match level {
            0 => &mut self.l1,
            1 => &mut self.l2,
            _ => &mut self.l3,
        }
    }

    pub(crate) fn set(&mut self, level: usize, name: Option<String>, code: Option<String>) {
        *self.slot_mut(level) = name;
        self.codes[level] = code;
    }

    /// Number of slots up to and including the deepest non-null one.
    pub fn depth(&self) -> usize {
        (0..LEVELS).rev().find(|&k| self.name(k).is_some()).map_or(0, |k| k + 1)
    }

    pub fn is_empty(&self) -> bool {
        self.depth() == 0
    }

    pub fn is_complete(&self) -> bool {
        self.depth() == LEVELS
    }

    /// True when the non-null slots are exactly `[0, depth)`.
    pub fn is_prefix_form(&self) -> bool {
        let depth = self.depth();
        (0..depth).all(|k| self.name(k).is_some())
    }

    /// Keeps the first `depth` slots and nulls the rest.
    pub fn truncated(&self, depth: usize) -> AdPath {
        let mut out = self.clone();
        for k in depth..LEVELS {
            out.set(k, None, None);
        }
        out
    }

    /// True when every non-null slot of `self` equals the same slot of `other`.
    /// Codes are compared when both sides carry them, names otherwise.
    pub fn agrees_with(&self, other: &AdPath) -> bool {
        (0..LEVELS).all(|k| match (self.name(k), other.name(k)) {
            (None, _) => true,
            (Some(_), None) => false,
            (Some(a), Some(b)) => match (self.code(k), other.code(k)) {
                (Some(ca), Some(cb)) => ca == cb,
                _ => a == b,
            },
        })
    }
}

impl fmt::Display for AdPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<&str> = self.names().iter().map(|n| n.unwrap_or("-")).collect();
        write!(f, "[{}]", parts.join(", "))
    }
}

/// Immutable hierarchical gazetteer with an exact surface-form index.
#[derive(Clone, Debug, Default)]
pub struct Gazetteer {
    records: Vec<AdRecord>,
    parents: Vec<Option<RecordId>>,
    children: Vec<Vec<RecordId>>,
    roots: Vec<RecordId>,
    by_code: HashMap<String, RecordId>,
    surface_index: HashMap<String, Vec<RecordId>>,
}

fn nfc(s: &str) -> String {
    s.nfc().collect()
}

impl Gazetteer {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_jsonl(&text)
    }

    /// Parses gazetteer JSONL. Blank lines and lines starting with `#` are skipped.
    pub fn from_jsonl(text: &str) -> Result<Self> {
        let mut records = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let record: AdRecord = serde_json::from_str(line).map_err(|e| Error::Parse {
                line: i + 1,
                message: e.to_string(),
            })?;
            records.push(record);
        }
        Self::from_records(records)
    }

    /// The fixture gazetteer shipped with the crate.
    pub fn bundled() -> Self {
        Self::from_jsonl(crate::fixtures::GAZETTEER_JSONL).expect("bundled gazetteer is valid")
    }

    pub fn from_records(records: Vec<AdRecord>) -> Result<Self> {
        let mut records: Vec<AdRecord> = records
            .into_iter()
            .map(|r| AdRecord {
                code: r.code,
                name: nfc(&r.name),
                aliases: r.aliases.iter().map(|a| nfc(a)).collect(),
                level: r.level,
                parent_code: r.parent_code,
            })
            .collect();
        records.sort_by(|a, b| a.code.cmp(&b.code));

        let mut by_code = HashMap::with_capacity(records.len());
        for (i, r) in records.iter().enumerate() {
            if !(1..=LEVELS as u8).contains(&r.level) {
                return Err(Error::InvalidRecord {
                    code: r.code.clone(),
                    message: format!("level {} out of range 1..=3", r.level),
                });
            }
            if r.name.is_empty() {
                return Err(Error::InvalidRecord {
                    code: r.code.clone(),
                    message: "empty name".into(),
                });
            }
            if by_code.insert(r.code.clone(), RecordId(i as u32)).is_some() {
                return Err(Error::DuplicateCode(r.code.clone()));
            }
        }

        let mut parents = vec![None; records.len()];
        let mut children = vec![Vec::new(); records.len()];
        let mut roots = Vec::new();
        let mut names_under: HashMap<(Option<RecordId>, &str), ()> = HashMap::new();
        for (i, r) in records.iter().enumerate() {
            let id = RecordId(i as u32);
            let parent = match (&r.parent_code, r.level) {
                (None, 1) => None,
                (None, _) => {
                    return Err(Error::InvalidRecord {
                        code: r.code.clone(),
                        message: format!("level {} record needs a parent_code", r.level),
                    })
                }
                (Some(_), 1) => {
                    return Err(Error::InvalidRecord {
                        code: r.code.clone(),
                        message: "level 1 record must not have a parent_code".into(),
                    })
                }
                (Some(p), level) => {
                    let pid = *by_code.get(p).ok_or_else(|| Error::DanglingParent {
                        code: r.code.clone(),
                        parent: p.clone(),
                    })?;
                    if records[pid.index()].level + 1 != level {
                        return Err(Error::InvalidRecord {
                            code: r.code.clone(),
                            message: format!(
                                "parent {p:?} is level {}, expected {}",
                                records[pid.index()].level,
                                level - 1
                            ),
                        });
                    }
                    Some(pid)
                }
            };
            if names_under.insert((parent, r.name.as_str()), ()).is_some() {
                return Err(Error::DuplicateName {
                    name: r.name.clone(),
                    parent: r.parent_code.clone(),
                });
            }
            parents[i] = parent;
            match parent {
                Some(p) => children[p.index()].push(id),
                None => roots.push(id),
            }
        }

        let mut surface_index: HashMap<String, Vec<RecordId>> = HashMap::new();
        for (i, r) in records.iter().enumerate() {
            for s in r.surfaces() {
                let ids = surface_index.entry(s.to_owned()).or_default();
                if !ids.contains(&RecordId(i as u32)) {
                    ids.push(RecordId(i as u32));
                }
            }
        }

        Ok(Gazetteer {
            records,
            parents,
            children,
            roots,
            by_code,
            surface_index,
        })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn record(&self, id: RecordId) -> &AdRecord {
        &self.records[id.index()]
    }

    pub fn records(&self) -> impl Iterator<Item = (RecordId, &AdRecord)> {
        self.records.iter().enumerate().map(|(i, r)| (RecordId(i as u32), r))
    }

    pub fn by_code(&self, code: &str) -> Option<RecordId> {
        self.by_code.get(code).copied()
    }

    pub fn parent(&self, id: RecordId) -> Option<RecordId> {
        self.parents[id.index()]
    }

    pub fn child_ids(&self, id: RecordId) -> &[RecordId] {
        &self.children[id.index()]
    }

    pub fn roots(&self) -> &[RecordId] {
        &self.roots
    }

    /// Every record whose name or alias equals `surface`, in code order.
    pub fn lookup(&self, surface: &str) -> &[RecordId] {
        self.surface_index.get(surface).map_or(&[], Vec::as_slice)
    }

    pub fn lookup_records(&self, surface: &str) -> Vec<&AdRecord> {
        self.lookup(surface).iter().map(|&id| self.record(id)).collect()
    }

    /// All indexed surface forms with their records.
    pub fn surfaces(&self) -> impl Iterator<Item = (&str, &[RecordId])> {
        self.surface_index.iter().map(|(s, ids)| (s.as_str(), ids.as_slice()))
    }

    /// Record ids from level 1 down to `id`, placed in their level slots.
    pub fn chain(&self, id: RecordId) -> Result<[Option<RecordId>; LEVELS]> {
        let mut slots = [None; LEVELS];
        let mut cur = Some(id);
        let mut expected = self.record(id).level as usize;
        while let Some(c) = cur {
            let r = self.record(c);
            if expected == 0 || r.level as usize != expected {
                return Err(Error::BrokenChain(r.code.clone()));
            }
            slots[expected - 1] = Some(c);
            expected -= 1;
            cur = self.parent(c);
        }
        if expected != 0 {
            return Err(Error::BrokenChain(self.record(id).code.clone()));
        }
        Ok(slots)
    }

    /// Expands a record to its full ancestor path; levels below the record stay null.
    pub fn expand(&self, id: RecordId) -> Result<AdPath> {
        Ok(self.path_from_ids(&self.chain(id)?))
    }

    pub fn path_from_ids(&self, ids: &[Option<RecordId>; LEVELS]) -> AdPath {
        let mut path = AdPath::empty();
        for (k, id) in ids.iter().enumerate() {
            if let Some(id) = id {
                let r = self.record(*id);
                path.set(k, Some(r.name.clone()), Some(r.code.clone()));
            }
        }
        path
    }

    /// Maps a path back to record ids. Codes are used when present, otherwise
    /// names are resolved top-down along parent edges. Returns `None` when the
    /// path does not denote a chain in this gazetteer.
    #[allow(clippy::needless_range_loop)]
    pub fn resolve(&self, path: &AdPath) -> Option<[Option<RecordId>; LEVELS]> {
        let mut ids = [None; LEVELS];
        let mut parent: Option<RecordId> = None;
        for k in 0..LEVELS {
            let Some(name) = path.name(k) else {
                continue;
            };
            let id = match path.code(k) {
                Some(code) => {
                    let id = self.by_code(code)?;
                    (self.record(id).name == name).then_some(id)?
                }
                None => {
                    let pool: &[RecordId] = match parent {
                        Some(p) => self.child_ids(p),
                        None if k == 0 => self.roots(),
                        None => return None,
                    };
                    *pool.iter().find(|&&c| self.record(c).name == name)?
                }
            };
            if self.record(id).level as usize != k + 1 {
                return None;
            }
            match parent {
                Some(p) if self.parent(id) != Some(p) => return None,
                None if k > 0 => return None,
                _ => {}
            }
            ids[k] = Some(id);
            parent = Some(id);
        }
        Some(ids)
    }

    /// True when every non-null level is a real record and consecutive
    /// non-null levels are parent/child edges.
    pub fn validates(&self, path: &AdPath) -> bool {
        path.is_prefix_form() && self.resolve(path).is_some()
    }

    /// Direct subdivisions of the deepest non-null level of `path`; the
    /// level-1 records for an empty path.
    pub fn children(&self, path: &AdPath) -> Result<Vec<RecordId>> {
        if path.is_complete() {
            return Err(Error::PathComplete);
        }
        if path.is_empty() {
            return Ok(self.roots.clone());
        }
        let ids = self.resolve(path).ok_or_else(|| Error::BrokenChain(path.to_string()))?;
        let deepest = ids[path.depth() - 1].ok_or_else(|| Error::BrokenChain(path.to_string()))?;
        Ok(self.child_ids(deepest).to_vec())
    }

    /// True if `ancestor` lies strictly above `id` on its parent chain.
    pub fn is_ancestor(&self, ancestor: RecordId, id: RecordId) -> bool {
        let mut cur = self.parent(id);
        while let Some(c) = cur {
            if c == ancestor {
                return true;
            }
            cur = self.parent(c);
        }
        false
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(g: &Gazetteer, ids: &[RecordId]) -> Vec<String> {
        ids.iter().map(|&id| g.record(id).name.clone()).collect()
    }

    #[test]
    fn alias_resolves_to_standard_record() {
        let g = Gazetteer::from_jsonl(
            r#"{"code":"420000","name":"湖北省","aliases":[],"level":1,"parent_code":null}
{"code":"420600","name":"襄阳市","aliases":["襄樊"],"level":2,"parent":"420000"}"#,
        )
        .unwrap();
        let hits = g.lookup_records("襄樊");
        assert_eq!(hits.len(), 1);
        assert_eq!(hits[0].name, "襄阳市");
        assert_eq!(hits[0].code, "420600");
    }

    #[test]
    fn empty_file_gives_empty_gazetteer() {
        let g = Gazetteer::from_jsonl("").unwrap();
        assert!(g.is_empty());
        assert!(g.lookup("北京").is_empty());
        let g = Gazetteer::from_jsonl("# only a comment\n\n").unwrap();
        assert!(g.is_empty());
    }

    #[test]
    fn dangling_parent_is_named() {
        let err =
            Gazetteer::from_jsonl(r#"{"code":"110105","name":"朝阳区","aliases":[],"level":3,"parent_code":"110100"}"#)
                .unwrap_err();
        match err {
            Error::DanglingParent { parent, .. } => assert_eq!(parent, "110100"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn load_errors() {
        let dup = r#"{"code":"1","name":"甲","level":1,"parent_code":null}
{"code":"1","name":"乙","level":1,"parent_code":null}"#;
        assert!(matches!(Gazetteer::from_jsonl(dup), Err(Error::DuplicateCode(_))));

        let level = r#"{"code":"1","name":"甲","level":4,"parent_code":null}"#;
        assert!(matches!(Gazetteer::from_jsonl(level), Err(Error::InvalidRecord { .. })));

        let bad = "{\"code\":\"1\",\"name\":\"甲\",\"level\":1,\"parent_code\":null}\n{not json";
        match Gazetteer::from_jsonl(bad) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }

        let same_name = r#"{"code":"1","name":"甲","level":1,"parent_code":null}
{"code":"2","name":"甲","level":1,"parent_code":null}"#;
        assert!(matches!(
            Gazetteer::from_jsonl(same_name),
            Err(Error::DuplicateName { .. })
        ));

        let skip = r#"{"code":"1","name":"甲","level":1,"parent_code":null}
{"code":"2","name":"乙","level":3,"parent_code":"1"}"#;
        assert!(matches!(Gazetteer::from_jsonl(skip), Err(Error::InvalidRecord { .. })));
    }

    #[test]
    fn duplicate_chaoyang() {
        let g = Gazetteer::bundled();
        let hits = g.lookup_records("朝阳区");
        let codes: Vec<&str> = hits.iter().map(|r| r.code.as_str()).collect();
        assert_eq!(codes, ["110105", "220104"]);
        assert!(g.lookup("不存在地名").is_empty());
    }

    #[test]
    fn expand_walks_to_root() {
        let g = Gazetteer::bundled();
        let id = g.lookup("尉犁县")[0];
        let path = g.expand(id).unwrap();
        assert_eq!(
            path.names(),
            [Some("新疆维吾尔自治区"), Some("巴音郭楞蒙古自治州"), Some("尉犁县")]
        );
        assert_eq!(path.code(2), Some("652823"));

        let hubei = g.by_code("420000").unwrap();
        assert_eq!(g.expand(hubei).unwrap().names(), [Some("湖北省"), None, None]);
    }

    #[test]
    fn municipality_duplicates_level_one_name() {
        let g = Gazetteer::bundled();
        let id = g.by_code("110105").unwrap();
        let path = g.expand(id).unwrap();
        assert_eq!(path.names(), [Some("北京市"), Some("北京市"), Some("朝阳区")]);
        assert_eq!(path.code(0), Some("110000"));
        assert_eq!(path.code(1), Some("110100"));
    }

    #[test]
    fn children_of_paths() {
        let g = Gazetteer::bundled();
        let xiangyang = g.expand(g.by_code("420600").unwrap()).unwrap();
        let kids = names(&g, &g.children(&xiangyang).unwrap());
        assert!(kids.contains(&"谷城县".to_string()));
        assert!(kids.contains(&"襄州区".to_string()));

        let roots = g.children(&AdPath::empty()).unwrap();
        assert_eq!(roots.len(), 12);
        assert!(roots.iter().all(|&r| g.record(r).level == 1));

        let leaf = g.expand(g.by_code("420625").unwrap()).unwrap();
        assert!(matches!(g.children(&leaf), Err(Error::PathComplete)));
    }

    #[test]
    fn every_expansion_round_trips() {
        let g = Gazetteer::bundled();
        for (id, r) in g.records() {
            let path = g.expand(id).unwrap();
            assert_eq!(path.depth(), r.level as usize);
            assert_eq!(path.name(path.depth() - 1), Some(r.name.as_str()));
            assert!(g.validates(&path));
            let ids = g.resolve(&path).unwrap();
            for k in 1..path.depth() {
                assert_eq!(g.parent(ids[k].unwrap()), ids[k - 1]);
            }
        }
    }

    #[test]
    fn resolve_by_names_only() {
        let g = Gazetteer::bundled();
        let p = AdPath::from_names([Some("吉林省"), Some("长春市"), Some("朝阳区")]);
        let ids = g.resolve(&p).unwrap();
        assert_eq!(g.record(ids[2].unwrap()).code, "220104");
        let wrong = AdPath::from_names([Some("吉林省"), Some("北京市"), None]);
        assert!(g.resolve(&wrong).is_none());
        let gap = AdPath::from_names([None, Some("长春市"), None]);
        assert!(!g.validates(&gap));
    }
}
