//! Clustered toy catalogs with known ground truth.
//!
//! Every cluster owns a disjoint pool of pseudo-words; a separate pool of
//! shared words is common to all clusters. Each item draws a few
//! "signature" words from its cluster pool. Titles mix signature words with
//! shared words; descriptions mix signature words, other words of the
//! cluster, and shared words. Items of the same cluster are annotated as
//! similar to each other.

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Annotation, AnnotationSet, Item};
use crate::{Error, Result};

const SYLLABLES: [&str; 16] = [
    "ba", "ce", "di", "fo", "gu", "ka", "le", "mi", "no", "pu", "ra", "se", "ti", "vo", "xu", "ze",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SyntheticSpec {
    pub n_clusters: usize,
    pub items_per_cluster: usize,
    /// Size of each cluster's exclusive word pool.
    pub words_per_cluster: usize,
    /// Size of the pool shared by all clusters.
    pub shared_words: usize,
    /// Probability that any token is drawn from the shared pool.
    pub shared_fraction: f64,
    /// Signature words per item, drawn from its cluster pool.
    pub signature_words: usize,
    /// Probability that a non-shared description token is a signature word
    /// rather than a uniform draw from the cluster pool.
    pub signature_rate: f64,
    pub title_len: usize,
    pub description_len: usize,
    pub seed: u64,
}

/// Defaults imitate function-word-heavy text: a small shared pool supplies
/// most tokens, so mean-pooled texts start out looking alike.
impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            n_clusters: 4,
            items_per_cluster: 50,
            words_per_cluster: 40,
            shared_words: 8,
            shared_fraction: 0.8,
            signature_words: 3,
            signature_rate: 0.5,
            title_len: 4,
            description_len: 16,
            seed: 17,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if self.n_clusters < 2 {
            return fail(format!("n_clusters {} < 2", self.n_clusters));
        }
        if self.items_per_cluster < 2 {
            return fail(format!("items_per_cluster {} < 2", self.items_per_cluster));
        }
        if !(0.0..1.0).contains(&self.shared_fraction) {
            return fail(format!("shared_fraction {} outside [0, 1)", self.shared_fraction));
        }
        if !(0.0..=1.0).contains(&self.signature_rate) {
            return fail(format!("signature_rate {} outside [0, 1]", self.signature_rate));
        }
        if self.shared_fraction > 0.0 && self.shared_words == 0 {
            return fail("shared_fraction > 0 needs shared_words > 0".into());
        }
        if self.signature_words == 0 || self.signature_words > self.words_per_cluster {
            return fail(format!(
                "signature_words must lie in 1..={}, got {}",
                self.words_per_cluster, self.signature_words
            ));
        }
        if self.title_len == 0 || self.description_len == 0 {
            return fail("title_len and description_len must be positive".into());
        }
        let total = self.n_clusters * self.words_per_cluster + self.shared_words;
        if total > SYLLABLES.len().pow(3) {
            return fail(format!("{total} distinct words requested, at most {}", SYLLABLES.len().pow(3)));
        }
        Ok(())
    }
}

/// A generated catalog, its annotations and the pools used to build it.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticCorpus {
    pub items: Vec<Item>,
    pub annotations: AnnotationSet,
    /// Cluster index of each entry of `items`.
    pub clusters: Vec<usize>,
    pub cluster_words: Vec<Vec<String>>,
    pub shared_words: Vec<String>,
}

fn word(index: usize) -> String {
    let n = SYLLABLES.len();
    format!("{}{}{}", SYLLABLES[index / (n * n)], SYLLABLES[(index / n) % n], SYLLABLES[index % n])
}

pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<SyntheticCorpus> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    // scatter word indices so neighbouring clusters do not share prefixes
    let total_words = spec.n_clusters * spec.words_per_cluster + spec.shared_words;
    let mut word_ids: Vec<usize> = (0..SYLLABLES.len().pow(3)).collect();
    word_ids.shuffle(&mut rng);
    let mut pool = word_ids[..total_words].iter().map(|&i| word(i));
    let cluster_words: Vec<Vec<String>> = (0..spec.n_clusters)
        .map(|_| pool.by_ref().take(spec.words_per_cluster).collect())
        .collect();
    let shared_words: Vec<String> = pool.collect();

    let n_items = spec.n_clusters * spec.items_per_cluster;
    let mut id_order: Vec<usize> = (0..n_items).collect();
    id_order.shuffle(&mut rng);
    let width = n_items.to_string().len();

    let mut items = Vec::with_capacity(n_items);
    let mut clusters = Vec::with_capacity(n_items);
    for cluster in 0..spec.n_clusters {
        let own = &cluster_words[cluster];
        for _ in 0..spec.items_per_cluster {
            let signature: Vec<&String> = own.choose_multiple(&mut rng, spec.signature_words).collect();
            let draw_shared = |rng: &mut ChaCha8Rng| spec.shared_fraction > 0.0 && rng.random_bool(spec.shared_fraction);
            let mut title: Vec<&str> = (0..spec.title_len)
                .map(|_| {
                    if draw_shared(&mut rng) {
                        shared_words.choose(&mut rng).expect("non-empty").as_str()
                    } else {
                        signature.choose(&mut rng).expect("non-empty").as_str()
                    }
                })
                .collect();
            // a title always carries at least one word of its own cluster
            if title.iter().all(|w| shared_words.iter().any(|s| s == w)) {
                title[0] = signature[0];
            }
            let description: Vec<&str> = (0..spec.description_len)
                .map(|_| {
                    if draw_shared(&mut rng) {
                        shared_words.choose(&mut rng).expect("non-empty").as_str()
                    } else if rng.random_bool(spec.signature_rate) {
                        signature.choose(&mut rng).expect("non-empty").as_str()
                    } else {
                        own.choose(&mut rng).expect("non-empty").as_str()
                    }
                })
                .collect();
            let index = items.len();
            items.push(Item {
                item_id: format!("syn-{:0width$}", id_order[index]),
                title: title.join(" "),
                description: format!("{}.", description.join(" ")),
            });
            clusters.push(cluster);
        }
    }

    let entries = (0..n_items)
        .map(|i| Annotation {
            source_id: items[i].item_id.clone(),
            similar_ids: (0..n_items)
                .filter(|&j| j != i && clusters[j] == clusters[i])
                .map(|j| items[j].item_id.clone())
                .collect(),
        })
        .collect();

    Ok(SyntheticCorpus {
        items,
        annotations: AnnotationSet { entries },
        clusters,
        cluster_words,
        shared_words,
    })
}
