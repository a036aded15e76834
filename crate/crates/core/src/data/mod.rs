//! Catalog and annotation files, tokenisation, and synthetic corpora.
//!
//! Both file kinds are UTF-8 JSON Lines. The first non-blank line is a
//! schema header, e.g. `{"schema":"textmetric.catalog","version":1}`, and
//! every following non-blank line is one record:
//!
//! ```text
//! {"item_id":"w-17","title":"...","description":"..."}
//! {"source_id":"w-17","similar_ids":["w-3","w-99"]}
//! ```
//!
//! A file with no content at all is an empty catalog / annotation set.

mod synthetic;
mod tokenizer;

use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::util::{read_to_string, write_atomic};
use crate::{Error, Result};

pub use synthetic::{generate_synthetic, SyntheticCorpus, SyntheticSpec};
pub use tokenizer::{normalize, words, Vocabulary};

pub const CATALOG_SCHEMA: &str = "textmetric.catalog";
pub const ANNOTATION_SCHEMA: &str = "textmetric.annotations";
pub const SCHEMA_VERSION: u32 = 1;

/// A catalog entry: two textual elements describing the same thing.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Item {
    pub item_id: String,
    pub title: String,
    pub description: String,
}

/// Expert judgement for one source item.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Annotation {
    pub source_id: String,
    /// Relevant ids, in the annotator's order.
    pub similar_ids: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct AnnotationSet {
    pub entries: Vec<Annotation>,
}

impl AnnotationSet {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Total number of (source, relevant item) pairs.
    pub fn num_pairs(&self) -> usize {
        self.entries.iter().map(|e| e.similar_ids.len()).sum()
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SchemaHeader {
    schema: String,
    version: u32,
}

fn header_line(schema: &str) -> String {
    serde_json::to_string(&SchemaHeader {
        schema: schema.to_string(),
        version: SCHEMA_VERSION,
    })
    .expect("header serializes")
}

/// Non-blank lines with 1-based line numbers, the schema header checked and
/// stripped.
fn records<'a>(text: &'a str, schema: &str, origin: &str) -> Result<Vec<(usize, &'a str)>> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty());
    let Some((line_no, first)) = lines.next() else {
        return Ok(Vec::new());
    };
    let header: SchemaHeader = serde_json::from_str(first).map_err(|e| {
        Error::ingestion(format!("{origin}:{line_no}"), format!("missing or malformed schema header: {e}"))
    })?;
    if header.schema != schema || header.version != SCHEMA_VERSION {
        return Err(Error::ingestion(
            format!("{origin}:{line_no}"),
            format!(
                "expected schema {schema} version {SCHEMA_VERSION}, found {} version {}",
                header.schema, header.version
            ),
        ));
    }
    Ok(lines.collect())
}

/// Parses catalog text; `origin` names the source in error locations.
pub fn parse_catalog(text: &str, origin: &str) -> Result<Vec<Item>> {
    let mut items = Vec::new();
    let mut seen = HashSet::new();
    for (line_no, line) in records(text, CATALOG_SCHEMA, origin)? {
        let loc = || format!("{origin}:{line_no}");
        let item: Item = serde_json::from_str(line).map_err(|e| Error::ingestion(loc(), format!("malformed record: {e}")))?;
        if item.item_id.is_empty() {
            return Err(Error::ingestion(loc(), "empty item_id"));
        }
        if words(&item.title).is_empty() {
            return Err(Error::ingestion(loc(), format!("item {:?} has an empty title", item.item_id)));
        }
        if words(&item.description).is_empty() {
            return Err(Error::ingestion(loc(), format!("item {:?} has an empty description", item.item_id)));
        }
        if !seen.insert(item.item_id.clone()) {
            return Err(Error::ingestion(loc(), format!("duplicate item_id {:?}", item.item_id)));
        }
        items.push(item);
    }
    Ok(items)
}

pub fn load_catalog(path: &Path) -> Result<Vec<Item>> {
    parse_catalog(&read_to_string(path)?, &path.display().to_string())
}

pub fn catalog_to_string(items: &[Item]) -> String {
    let mut out = header_line(CATALOG_SCHEMA);
    out.push('\n');
    for item in items {
        out.push_str(&serde_json::to_string(item).expect("item serializes"));
        out.push('\n');
    }
    out
}

pub fn write_catalog(path: &Path, items: &[Item]) -> Result<()> {
    write_atomic(path, catalog_to_string(items).as_bytes())
}

/// Parses annotation text, checking every id against `known_ids`.
pub fn parse_annotations(text: &str, origin: &str, known_ids: &HashSet<&str>) -> Result<AnnotationSet> {
    let mut entries = Vec::new();
    let mut sources = HashSet::new();
    for (line_no, line) in records(text, ANNOTATION_SCHEMA, origin)? {
        let loc = || format!("{origin}:{line_no}");
        let entry: Annotation =
            serde_json::from_str(line).map_err(|e| Error::ingestion(loc(), format!("malformed record: {e}")))?;
        if !known_ids.contains(entry.source_id.as_str()) {
            return Err(Error::ingestion(loc(), format!("unknown source_id {:?}", entry.source_id)));
        }
        if !sources.insert(entry.source_id.clone()) {
            return Err(Error::ingestion(loc(), format!("source {:?} annotated twice", entry.source_id)));
        }
        if entry.similar_ids.is_empty() {
            return Err(Error::ingestion(loc(), format!("source {:?} has no similar ids", entry.source_id)));
        }
        let mut listed = HashSet::new();
        for id in &entry.similar_ids {
            if !known_ids.contains(id.as_str()) {
                return Err(Error::ingestion(loc(), format!("unknown similar id {id:?}")));
            }
            if *id == entry.source_id {
                return Err(Error::ingestion(loc(), format!("source {id:?} lists itself as similar")));
            }
            if !listed.insert(id.as_str()) {
                return Err(Error::ingestion(loc(), format!("similar id {id:?} listed twice")));
            }
        }
        entries.push(entry);
    }
    Ok(AnnotationSet { entries })
}

pub fn load_annotations(path: &Path, catalog: &[Item]) -> Result<AnnotationSet> {
    let known: HashSet<&str> = catalog.iter().map(|i| i.item_id.as_str()).collect();
    load_annotations_for_ids(path, &known)
}

pub fn load_annotations_for_ids(path: &Path, known_ids: &HashSet<&str>) -> Result<AnnotationSet> {
    parse_annotations(&read_to_string(path)?, &path.display().to_string(), known_ids)
}

pub fn annotations_to_string(set: &AnnotationSet) -> String {
    let mut out = header_line(ANNOTATION_SCHEMA);
    out.push('\n');
    for entry in &set.entries {
        out.push_str(&serde_json::to_string(entry).expect("annotation serializes"));
        out.push('\n');
    }
    out
}

pub fn write_annotations(path: &Path, set: &AnnotationSet) -> Result<()> {
    write_atomic(path, annotations_to_string(set).as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn header() -> String {
        header_line(CATALOG_SCHEMA)
    }

    fn record(id: &str) -> String {
        format!(r#"{{"item_id":"{id}","title":"Title {id}","description":"About {id}."}}"#)
    }

    #[test]
    fn empty_file_is_empty_catalog() {
        assert!(parse_catalog("", "t").unwrap().is_empty());
        assert!(parse_catalog(&header(), "t").unwrap().is_empty());
    }

    #[test]
    fn one_record() {
        let text = format!("{}\n{}\n", header(), record("a"));
        let items = parse_catalog(&text, "t").unwrap();
        assert_eq!(items.len(), 1);
        assert_eq!(items[0].item_id, "a");
    }

    #[test]
    fn duplicate_id_names_its_line() {
        let mut lines = vec![header()];
        for id in ["a", "b", "c", "d", "e"] {
            lines.push(record(id));
        }
        lines.push(record("c")); // line 7
        let err = parse_catalog(&lines.join("\n"), "fixture.jsonl").unwrap_err();
        match err {
            Error::Ingestion { location, message } => {
                assert_eq!(location, "fixture.jsonl:7");
                assert!(message.contains("duplicate"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rejects_empty_elements_and_bad_headers() {
        let text = format!("{}\n{}", header(), r#"{"item_id":"x","title":"  ...  ","description":"ok"}"#);
        assert!(matches!(parse_catalog(&text, "t"), Err(Error::Ingestion { .. })));
        let missing_field = format!("{}\n{}", header(), r#"{"item_id":"x","title":"t"}"#);
        assert!(parse_catalog(&missing_field, "t").is_err());
        assert!(parse_catalog(&record("a"), "t").is_err());
        let wrong = header_line(ANNOTATION_SCHEMA);
        assert!(parse_catalog(&wrong, "t").is_err());
    }

    #[test]
    fn catalog_round_trip() {
        let items = vec![
            Item {
                item_id: "1".into(),
                title: "Château \"Quoted\"".into(),
                description: "line\nbreak".into(),
            },
            Item {
                item_id: "2".into(),
                title: "B".into(),
                description: "c".into(),
            },
        ];
        let again = parse_catalog(&catalog_to_string(&items), "t").unwrap();
        assert_eq!(items, again);
    }

    fn known<'a>(ids: &'a [&'a str]) -> HashSet<&'a str> {
        ids.iter().copied().collect()
    }

    #[test]
    fn annotations_enforce_referential_integrity() {
        let ids = known(&["a", "b", "c"]);
        let good = format!(
            "{}\n{}\n",
            header_line(ANNOTATION_SCHEMA),
            r#"{"source_id":"a","similar_ids":["c","b"]}"#
        );
        let set = parse_annotations(&good, "t", &ids).unwrap();
        assert_eq!(set.entries[0].similar_ids, vec!["c", "b"]);

        let missing = format!(
            "{}\n{}\n",
            header_line(ANNOTATION_SCHEMA),
            r#"{"source_id":"a","similar_ids":["zzz"]}"#
        );
        let err = parse_annotations(&missing, "t", &ids).unwrap_err().to_string();
        assert!(err.contains("zzz") && err.contains("t:2"), "{err}");

        assert!(parse_annotations("", "t", &ids).unwrap().is_empty());
    }

    #[test]
    fn ninety_sources_with_ten_annotations() {
        let ids: Vec<String> = (0..200).map(|i| format!("g{i}")).collect();
        let known: HashSet<&str> = ids.iter().map(String::as_str).collect();
        let set = AnnotationSet {
            entries: (0..90)
                .map(|s| Annotation {
                    source_id: ids[s].clone(),
                    similar_ids: (1..=10).map(|k| ids[(s + k * 7) % 200].clone()).collect(),
                })
                .collect(),
        };
        let parsed = parse_annotations(&annotations_to_string(&set), "t", &known).unwrap();
        assert_eq!(parsed.len(), 90);
        assert_eq!(parsed.num_pairs(), 900);
        assert_eq!(parsed, set);
    }
}
