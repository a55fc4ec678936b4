//! JSON formats for behaviors (`nsbox-v1`) and box catalogs.
//!
//! ```json
//! { "parties": 2, "format": "nsbox-v1",
//!   "table": [ { "x": [0, 0], "a": [0, 0], "p": 0.5 }, ... ] }
//! ```
//!
//! Entries that are omitted default to 0. A catalog is a JSON array of
//! `{ "class": <int>, "behavior": <behavior object> }`.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::behavior::Behavior;
use crate::error::{Error, Result};

pub const FORMAT_TAG: &str = "nsbox-v1";

/// Class ids run over the 46 tripartite extremal classes.
pub const CLASS_ID_RANGE: std::ops::RangeInclusive<u32> = 1..=46;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TableEntry {
    pub x: Vec<u8>,
    pub a: Vec<u8>,
    pub p: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BehaviorFile {
    pub parties: usize,
    pub format: String,
    pub table: Vec<TableEntry>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CatalogFileEntry {
    pub class: u32,
    pub behavior: BehaviorFile,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CatalogEntry {
    pub class_id: u32,
    pub representative: Behavior,
}

/// Labeled extremal behaviors, validated on load.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxCatalog {
    pub entries: Vec<CatalogEntry>,
    pub source: String,
}

fn bits_to_mask(bits: &[u8], parties: usize, what: &str) -> Result<u32> {
    if bits.len() != parties {
        return Err(Error::Structure(format!(
            "`{what}` has {} components, expected {parties}",
            bits.len()
        )));
    }
    bits.iter().enumerate().try_fold(0u32, |acc, (k, &b)| match b {
        0 | 1 => Ok(acc | u32::from(b) << k),
        _ => Err(Error::Structure(format!("`{what}` component {b} is not a bit"))),
    })
}

fn mask_to_bits(mask: u32, parties: usize) -> Vec<u8> {
    (0..parties).map(|k| ((mask >> k) & 1) as u8).collect()
}

impl BehaviorFile {
    pub fn from_behavior(b: &Behavior) -> Self {
        let n = b.settings();
        let mut table = Vec::new();
        for x in 0..n {
            for a in 0..n {
                let p = b.prob(x, a);
                if p != 0.0 {
                    table.push(TableEntry {
                        x: mask_to_bits(x, b.parties()),
                        a: mask_to_bits(a, b.parties()),
                        p,
                    });
                }
            }
        }
        Self {
            parties: b.parties(),
            format: FORMAT_TAG.to_string(),
            table,
        }
    }

    /// Builds the dense table without checking probability constraints.
    pub fn to_unchecked(&self) -> Result<Behavior> {
        if self.format != FORMAT_TAG {
            return Err(Error::Structure(format!(
                "unknown format `{}`, expected `{FORMAT_TAG}`",
                self.format
            )));
        }
        if !(crate::behavior::MIN_PARTIES..=crate::behavior::MAX_PARTIES).contains(&self.parties)
        {
            return Err(Error::Structure(format!(
                "party count {} out of range",
                self.parties
            )));
        }
        let n = self.parties;
        let mut table = vec![0.0; 1 << (2 * n)];
        let mut seen = BTreeSet::new();
        for e in &self.table {
            let x = bits_to_mask(&e.x, n, "x")?;
            let a = bits_to_mask(&e.a, n, "a")?;
            let idx = ((x as usize) << n) | a as usize;
            if !seen.insert(idx) {
                return Err(Error::Structure(format!(
                    "duplicate entry for x={:?} a={:?}",
                    e.x, e.a
                )));
            }
            table[idx] = e.p;
        }
        Behavior::from_table(n, table)
    }

    pub fn to_behavior(&self) -> Result<Behavior> {
        let b = self.to_unchecked()?;
        let report = b.validate();
        if report.is_valid() {
            Ok(b)
        } else {
            Err(Error::Invalid(report))
        }
    }
}

pub fn behavior_to_json(b: &Behavior) -> String {
    serde_json::to_string_pretty(&BehaviorFile::from_behavior(b)).expect("plain data serializes")
}

pub fn behavior_from_json(text: &str) -> Result<Behavior> {
    let file: BehaviorFile = serde_json::from_str(text)?;
    file.to_behavior()
}

pub fn save_behavior(path: impl AsRef<Path>, b: &Behavior) -> Result<()> {
    fs::write(path, behavior_to_json(b) + "\n")?;
    Ok(())
}

pub fn load_behavior(path: impl AsRef<Path>) -> Result<Behavior> {
    behavior_from_json(&fs::read_to_string(path)?)
}

impl BoxCatalog {
    pub fn from_json(text: &str, source: impl Into<String>) -> Result<Self> {
        let raw: Vec<CatalogFileEntry> = serde_json::from_str(text)?;
        let mut ids = BTreeSet::new();
        let mut entries = Vec::with_capacity(raw.len());
        for (index, e) in raw.iter().enumerate() {
            if !CLASS_ID_RANGE.contains(&e.class) {
                return Err(Error::Structure(format!(
                    "entry {index}: class id {} outside 1..=46",
                    e.class
                )));
            }
            if !ids.insert(e.class) {
                return Err(Error::DuplicateClass(e.class));
            }
            let b = e.behavior.to_unchecked().map_err(|err| {
                Error::Structure(format!("entry {index} (class {}): {err}", e.class))
            })?;
            let report = b.validate();
            if !report.is_valid() {
                return Err(Error::CatalogEntry {
                    index,
                    class: e.class,
                    report,
                });
            }
            entries.push(CatalogEntry {
                class_id: e.class,
                representative: b,
            });
        }
        Ok(Self {
            entries,
            source: source.into(),
        })
    }

    pub fn to_json(&self) -> String {
        let raw: Vec<CatalogFileEntry> = self
            .entries
            .iter()
            .map(|e| CatalogFileEntry {
                class: e.class_id,
                behavior: BehaviorFile::from_behavior(&e.representative),
            })
            .collect();
        serde_json::to_string_pretty(&raw).expect("plain data serializes")
    }

    pub fn class_ids(&self) -> BTreeSet<u32> {
        self.entries.iter().map(|e| e.class_id).collect()
    }
}

pub fn load_catalog(path: impl AsRef<Path>) -> Result<BoxCatalog> {
    let path = path.as_ref();
    BoxCatalog::from_json(&fs::read_to_string(path)?, path.display().to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_entry_catalog() {
        let cat = BoxCatalog {
            entries: vec![CatalogEntry {
                class_id: 45,
                representative: Behavior::box45(3).unwrap(),
            }],
            source: "test".into(),
        };
        let back = BoxCatalog::from_json(&cat.to_json(), "test").unwrap();
        assert_eq!(back.entries.len(), 1);
        assert_eq!(back, cat);
    }

    #[test]
    fn signaling_entry_is_rejected() {
        let mut table = Behavior::white(3).unwrap().table().to_vec();
        // Party A's outcome now follows party B's input.
        for x in 0..8usize {
            let y = (x >> 1) & 1;
            for a in 0..8usize {
                table[(x << 3) | a] = if a & 1 == y { 0.25 } else { 0.0 };
            }
        }
        let signaling = Behavior::from_table(3, table).unwrap();
        let text = format!(
            "[{{\"class\": 3, \"behavior\": {}}}]",
            serde_json::to_string(&BehaviorFile::from_behavior(&signaling)).unwrap()
        );
        match BoxCatalog::from_json(&text, "bad") {
            Err(Error::CatalogEntry { index, class, report }) => {
                assert_eq!((index, class), (0, 3));
                assert!(report.max_signaling().unwrap() > 0.9);
            }
            other => panic!("expected rejection, got {other:?}"),
        }
    }

    #[test]
    fn file_round_trip_is_exact() {
        let b = Behavior::isotropic(0.7, 3).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("iso.json");
        save_behavior(&path, &b).unwrap();
        let back = load_behavior(&path).unwrap();
        assert!(back.max_abs_diff(&b) <= 1e-15);
    }

    #[test]
    fn omitted_entries_default_to_zero() {
        let text = r#"{"parties":2,"format":"nsbox-v1","table":[
            {"x":[0,0],"a":[0,0],"p":1},{"x":[1,0],"a":[0,0],"p":1},
            {"x":[0,1],"a":[0,0],"p":1},{"x":[1,1],"a":[0,0],"p":1}]}"#;
        let b = behavior_from_json(text).unwrap();
        assert_eq!(b, Behavior::deterministic_zero(2).unwrap());
    }

    #[test]
    fn malformed_files() {
        assert!(matches!(behavior_from_json("{"), Err(Error::Parse(_))));
        let wrong_tag = r#"{"parties":2,"format":"v0","table":[]}"#;
        assert!(matches!(behavior_from_json(wrong_tag), Err(Error::Structure(_))));
        let bad_bits = r#"{"parties":2,"format":"nsbox-v1","table":[{"x":[0,2],"a":[0,0],"p":1}]}"#;
        assert!(matches!(behavior_from_json(bad_bits), Err(Error::Structure(_))));
        let dup = r#"[{"class":1,"behavior":{"parties":2,"format":"nsbox-v1","table":[]}},
                      {"class":1,"behavior":{"parties":2,"format":"nsbox-v1","table":[]}}]"#;
        assert!(BoxCatalog::from_json(dup, "dup").is_err());
    }
}
