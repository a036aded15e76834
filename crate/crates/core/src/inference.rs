//! Catalog embedding, pairwise scoring and full-catalog ranking.
//!
//! The score of candidate `c` for source `s` is
//! `d(title_s, title_c) + d(desc_s, desc_c)` with `d` the angular
//! distance, so lower is more similar and the range is `[0, 2]`.

use std::cmp::Ordering;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::Item;
use crate::encoder::{Checkpoint, TokenSequence};
use crate::geometry::{angular_distance, cosine_similarity, Embedding};
use crate::trainer::tokenize_items;
use crate::util::{fmt6, read_to_string, write_atomic};
use crate::{Error, Result};

pub const EMBEDDINGS_SCHEMA: &str = "textmetric.embeddings";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ItemEmbedding {
    pub item_id: String,
    pub title: Embedding,
    pub description: Embedding,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CatalogEmbeddings {
    pub items: Vec<ItemEmbedding>,
    /// Texts cut to the encoder's maximum length before encoding.
    pub truncated: usize,
}

/// Encodes both elements of every item without masking. Over-long texts
/// are truncated and counted.
pub fn embed_catalog(items: &[Item], checkpoint: &Checkpoint) -> Result<CatalogEmbeddings> {
    let encoder = &checkpoint.encoder;
    let (tokenized, truncated) = tokenize_items(items, &checkpoint.vocabulary, encoder.config().max_seq_len)?;
    let items = tokenized
        .into_iter()
        .map(|t| {
            Ok(ItemEmbedding {
                title: encoder.encode(&TokenSequence::unmasked(t.title))?.pooled,
                description: encoder.encode(&TokenSequence::unmasked(t.description))?.pooled,
                item_id: t.item_id,
            })
        })
        .collect::<Result<_>>()?;
    Ok(CatalogEmbeddings { items, truncated })
}

/// Sum of title and description angular distances.
pub fn score(source: &ItemEmbedding, candidate: &ItemEmbedding) -> Result<f64> {
    if source.title.dim() != candidate.title.dim() || source.description.dim() != candidate.description.dim() {
        return Err(Error::contract(format!(
            "embedding dimensions differ between {} and {}",
            source.item_id, candidate.item_id
        )));
    }
    Ok(angular_distance(&source.title, &candidate.title)? + angular_distance(&source.description, &candidate.description)?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankedCandidate {
    pub item_id: String,
    pub score: f64,
}

/// Candidates for one source, best first.
#[derive(Debug, Clone, PartialEq)]
pub struct Ranking {
    pub source_id: String,
    pub candidates: Vec<RankedCandidate>,
}

/// Every other catalog item, ascending by score; equal scores fall back to
/// ascending item id.
pub fn rank(source_id: &str, catalog: &[ItemEmbedding]) -> Result<Ranking> {
    let source = catalog
        .iter()
        .find(|e| e.item_id == source_id)
        .ok_or_else(|| Error::Lookup(source_id.to_string()))?;
    let mut candidates = catalog
        .iter()
        .filter(|c| c.item_id != source_id)
        .map(|c| {
            Ok(RankedCandidate {
                item_id: c.item_id.clone(),
                score: score(source, c)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    candidates.sort_by(|a, b| {
        a.score
            .partial_cmp(&b.score)
            .unwrap_or(Ordering::Equal)
            .then_with(|| a.item_id.cmp(&b.item_id))
    });
    Ok(Ranking {
        source_id: source_id.to_string(),
        candidates,
    })
}

/// [`rank`] for every item, in catalog order.
pub fn rank_all(catalog: &[ItemEmbedding]) -> Result<Vec<Ranking>> {
    catalog.iter().map(|s| rank(&s.item_id, catalog)).collect()
}

/// Median cosine similarity over all unordered pairs of element embeddings
/// (titles and descriptions pooled together). Values near 1 mean the
/// catalog sits in a narrow cone.
pub fn median_pairwise_cosine(embeddings: &[ItemEmbedding]) -> Result<f64> {
    let vectors: Vec<&Embedding> = embeddings.iter().flat_map(|e| [&e.title, &e.description]).collect();
    if vectors.len() < 2 {
        return Err(Error::contract("median pairwise cosine needs at least two vectors"));
    }
    let mut sims = Vec::with_capacity(vectors.len() * (vectors.len() - 1) / 2);
    for (i, a) in vectors.iter().enumerate() {
        for b in &vectors[i + 1..] {
            sims.push(cosine_similarity(a, b)?);
        }
    }
    sims.sort_by(f64::total_cmp);
    let mid = sims.len() / 2;
    Ok(if sims.len() % 2 == 1 {
        sims[mid]
    } else {
        0.5 * (sims[mid - 1] + sims[mid])
    })
}

/// `source_id,candidate_id,rank,score` rows, ranks 1-based.
pub fn rankings_csv(rankings: &[Ranking]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["source_id", "candidate_id", "rank", "score"]).expect("in-memory write");
    for r in rankings {
        for (i, c) in r.candidates.iter().enumerate() {
            w.write_record([r.source_id.as_str(), c.item_id.as_str(), &(i + 1).to_string(), &fmt6(c.score)])
                .expect("in-memory write");
        }
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
}

pub fn write_rankings(path: &Path, rankings: &[Ranking]) -> Result<()> {
    write_atomic(path, rankings_csv(rankings).as_bytes())
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EmbeddingsHeader {
    schema: String,
    version: u32,
    seed: u64,
    dim: usize,
}

/// JSON Lines: a header with the producing seed and dimension, then one
/// [`ItemEmbedding`] per line. Floats round-trip exactly.
pub fn embeddings_to_string(embeddings: &[ItemEmbedding], seed: u64) -> String {
    let header = EmbeddingsHeader {
        schema: EMBEDDINGS_SCHEMA.to_string(),
        version: 1,
        seed,
        dim: embeddings.first().map_or(0, |e| e.title.dim()),
    };
    let mut out = serde_json::to_string(&header).expect("header serializes");
    out.push('\n');
    for e in embeddings {
        out.push_str(&serde_json::to_string(e).expect("embedding serializes"));
        out.push('\n');
    }
    out
}

pub fn parse_embeddings(text: &str, origin: &str) -> Result<Vec<ItemEmbedding>> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let Some((_, first)) = lines.next() else {
        return Ok(Vec::new());
    };
    let header: EmbeddingsHeader = serde_json::from_str(first)
        .map_err(|e| Error::ingestion(format!("{origin}:1"), format!("bad embeddings header: {e}")))?;
    if header.schema != EMBEDDINGS_SCHEMA || header.version != 1 {
        return Err(Error::ingestion(format!("{origin}:1"), "unexpected embeddings schema"));
    }
    lines
        .map(|(i, line)| {
            let e: ItemEmbedding = serde_json::from_str(line)
                .map_err(|err| Error::ingestion(format!("{origin}:{}", i + 1), err.to_string()))?;
            if e.title.dim() != header.dim || e.description.dim() != header.dim {
                return Err(Error::ingestion(format!("{origin}:{}", i + 1), "embedding dimension mismatch"));
            }
            Ok(e)
        })
        .collect()
}

pub fn write_embeddings(path: &Path, embeddings: &[ItemEmbedding], seed: u64) -> Result<()> {
    write_atomic(path, embeddings_to_string(embeddings, seed).as_bytes())
}

pub fn load_embeddings(path: &Path) -> Result<Vec<ItemEmbedding>> {
    parse_embeddings(&read_to_string(path)?, &path.display().to_string())
}
