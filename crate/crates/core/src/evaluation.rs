//! Ranking quality against expert annotations.
//!
//! Every (source, relevant item) pair with 1-based rank `r` in a list of `M`
//! candidates has percentile `(M - r) / (M - 1)`; MPR averages it over all
//! pairs, so a perfect ranker scores 1 and a random one 0.5. MRR takes the
//! rank of the first relevant item per source. HR@k is the fraction of
//! pairs ranked within the top `k`.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use serde::Deserialize;

use crate::data::{AnnotationSet, Item};
use crate::inference::{embed_catalog, rank_all, Ranking};
use crate::trainer::{train, TrainConfig};
use crate::util::{fmt6, read_to_string, write_atomic};
use crate::{Error, Result};

/// Cut-offs reported by default.
pub const DEFAULT_KS: [usize; 2] = [10, 100];

/// Ordered candidate ids per source, best first.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Rankings {
    lists: BTreeMap<String, Vec<String>>,
}

impl Rankings {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, source_id: impl Into<String>, candidates: Vec<String>) {
        self.lists.insert(source_id.into(), candidates);
    }

    pub fn get(&self, source_id: &str) -> Option<&[String]> {
        self.lists.get(source_id).map(Vec::as_slice)
    }

    pub fn len(&self) -> usize {
        self.lists.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lists.is_empty()
    }

    pub fn sources(&self) -> impl Iterator<Item = &str> {
        self.lists.keys().map(String::as_str)
    }

    /// Every id mentioned as a source or candidate.
    pub fn ids(&self) -> std::collections::HashSet<&str> {
        self.lists
            .iter()
            .flat_map(|(s, c)| std::iter::once(s.as_str()).chain(c.iter().map(String::as_str)))
            .collect()
    }

    pub fn from_ranked(rankings: &[Ranking]) -> Self {
        let mut out = Self::new();
        for r in rankings {
            out.insert(r.source_id.clone(), r.candidates.iter().map(|c| c.item_id.clone()).collect());
        }
        out
    }

    /// Parses `source_id,candidate_id,rank,score` rows. Ranks must run
    /// 1..=M without gaps for every source; row order does not matter.
    pub fn parse_csv(text: &str, origin: &str) -> Result<Self> {
        #[derive(Deserialize)]
        struct Row {
            source_id: String,
            candidate_id: String,
            rank: usize,
            #[allow(dead_code)]
            score: f64,
        }
        let mut reader = csv::Reader::from_reader(text.as_bytes());
        let mut by_source: BTreeMap<String, Vec<(usize, String)>> = BTreeMap::new();
        for (i, row) in reader.deserialize::<Row>().enumerate() {
            let row = row.map_err(|e| Error::ingestion(format!("{origin}:{}", i + 2), e.to_string()))?;
            by_source.entry(row.source_id).or_default().push((row.rank, row.candidate_id));
        }
        let mut out = Self::new();
        for (source, mut rows) in by_source {
            rows.sort();
            if rows.iter().enumerate().any(|(i, (r, _))| *r != i + 1) {
                return Err(Error::ingestion(origin, format!("ranks of source {source} are not 1..=M")));
            }
            out.insert(source, rows.into_iter().map(|(_, id)| id).collect());
        }
        Ok(out)
    }

    pub fn load_csv(path: &Path) -> Result<Self> {
        Self::parse_csv(&read_to_string(path)?, &path.display().to_string())
    }
}

/// 1-based ranks of every annotated pair, grouped per source, plus the list
/// length `M` of that source.
fn annotated_ranks(rankings: &Rankings, annotations: &AnnotationSet) -> Result<Vec<(usize, Vec<usize>)>> {
    if annotations.is_empty() {
        return Err(Error::Evaluation("no annotations to evaluate against".into()));
    }
    annotations
        .entries
        .iter()
        .map(|entry| {
            let list = rankings
                .get(&entry.source_id)
                .ok_or_else(|| Error::Evaluation(format!("no ranking for source {}", entry.source_id)))?;
            let position: HashMap<&str, usize> = list.iter().enumerate().map(|(i, id)| (id.as_str(), i + 1)).collect();
            let ranks = entry
                .similar_ids
                .iter()
                .map(|id| {
                    position.get(id.as_str()).copied().ok_or_else(|| {
                        Error::Evaluation(format!("annotated id {id} missing from the ranking of {}", entry.source_id))
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            Ok((list.len(), ranks))
        })
        .collect()
}

pub fn mean_percentile_rank(rankings: &Rankings, annotations: &AnnotationSet) -> Result<f64> {
    let groups = annotated_ranks(rankings, annotations)?;
    let mut sum = 0.0;
    let mut pairs = 0usize;
    for (m, ranks) in &groups {
        if *m < 2 {
            return Err(Error::Evaluation(format!("percentile rank needs at least 2 candidates, got {m}")));
        }
        for &r in ranks {
            sum += (m - r) as f64 / (m - 1) as f64;
            pairs += 1;
        }
    }
    Ok(sum / pairs as f64)
}

pub fn mean_reciprocal_rank(rankings: &Rankings, annotations: &AnnotationSet) -> Result<f64> {
    let groups = annotated_ranks(rankings, annotations)?;
    let sum: f64 = groups
        .iter()
        .map(|(_, ranks)| 1.0 / *ranks.iter().min().expect("relevance lists are non-empty") as f64)
        .sum();
    Ok(sum / groups.len() as f64)
}

pub fn hit_ratio_at_k(rankings: &Rankings, annotations: &AnnotationSet, k: usize) -> Result<f64> {
    if k == 0 {
        return Err(Error::Evaluation("k must be at least 1".into()));
    }
    let groups = annotated_ranks(rankings, annotations)?;
    let (hits, pairs) = groups.iter().fold((0usize, 0usize), |(h, p), (_, ranks)| {
        (h + ranks.iter().filter(|&&r| r <= k).count(), p + ranks.len())
    });
    Ok(hits as f64 / pairs as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricReport {
    pub mpr: f64,
    pub mrr: f64,
    pub hr_at: BTreeMap<usize, f64>,
    pub n_sources: usize,
}

impl MetricReport {
    pub fn csv_header(&self) -> String {
        let mut cols = vec!["mpr".to_string(), "mrr".to_string()];
        cols.extend(self.hr_at.keys().map(|k| format!("hr{k}")));
        cols.join(",")
    }

    pub fn csv_values(&self) -> String {
        let mut cols = vec![fmt6(self.mpr), fmt6(self.mrr)];
        cols.extend(self.hr_at.values().map(|v| fmt6(*v)));
        cols.join(",")
    }

    /// Header plus one row.
    pub fn to_csv(&self) -> String {
        format!("{}\n{}\n", self.csv_header(), self.csv_values())
    }
}

pub fn evaluate(rankings: &Rankings, annotations: &AnnotationSet, ks: &[usize]) -> Result<MetricReport> {
    let mut hr_at = BTreeMap::new();
    for &k in ks {
        hr_at.insert(k, hit_ratio_at_k(rankings, annotations, k)?);
    }
    Ok(MetricReport {
        mpr: mean_percentile_rank(rankings, annotations)?,
        mrr: mean_reciprocal_rank(rankings, annotations)?,
        hr_at,
        n_sources: annotations.len(),
    })
}

/// Trains `config` on `items`, ranks the whole catalog with the result, and
/// scores the rankings.
pub fn train_and_evaluate(items: &[Item], annotations: &AnnotationSet, config: &TrainConfig) -> Result<MetricReport> {
    let report = train(items, config)?;
    let embeddings = embed_catalog(items, &report.checkpoint)?;
    let rankings = Rankings::from_ranked(&rank_all(&embeddings.items)?);
    evaluate(&rankings, annotations, &DEFAULT_KS)
}

/// One row of an ablation table.
#[derive(Debug)]
pub struct VariantRow {
    pub variant: String,
    pub result: Result<MetricReport>,
}

/// One row per config, in order. A failing config yields an error row and
/// does not stop the others.
pub fn compare_variants(items: &[Item], annotations: &AnnotationSet, configs: &[TrainConfig]) -> Vec<VariantRow> {
    configs
        .iter()
        .map(|cfg| VariantRow {
            variant: cfg.loss_variant.name().to_string(),
            result: train_and_evaluate(items, annotations, cfg),
        })
        .collect()
}

/// `variant,mpr,mrr,hr10,hr100`; rows that failed carry empty metric
/// fields.
pub fn variants_csv(rows: &[VariantRow]) -> String {
    let mut out = String::from("variant,mpr,mrr,hr10,hr100\n");
    for row in rows {
        match &row.result {
            Ok(r) => {
                let hr = |k: usize| r.hr_at.get(&k).map_or(String::new(), |v| fmt6(*v));
                out.push_str(&format!("{},{},{},{},{}\n", row.variant, fmt6(r.mpr), fmt6(r.mrr), hr(10), hr(100)));
            }
            Err(_) => out.push_str(&format!("{},,,,\n", row.variant)),
        }
    }
    out
}

pub fn write_variants(path: &Path, rows: &[VariantRow]) -> Result<()> {
    write_atomic(path, variants_csv(rows).as_bytes())
}
