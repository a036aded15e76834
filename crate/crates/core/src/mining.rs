//! In-batch negative selection.
//!
//! For anchor `i`, every anchor and positive embedding of the other batch
//! items is a candidate; the candidate closest to the anchor is the hard
//! negative. Candidates are scanned in item order with the anchor element
//! before the positive element, and the first minimum wins.

use rand::Rng;

use crate::geometry::{DistanceKind, Embedding};
use crate::{Error, Result};

/// Pooled embeddings of one batch: `anchors[i]` and `positives[i]` are the
/// two elements of item `item_ids[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchEmbeddings {
    pub anchors: Vec<Embedding>,
    pub positives: Vec<Embedding>,
    pub item_ids: Vec<String>,
}

impl BatchEmbeddings {
    pub fn new(anchors: Vec<Embedding>, positives: Vec<Embedding>, item_ids: Vec<String>) -> Result<Self> {
        if anchors.len() != positives.len() || anchors.len() != item_ids.len() {
            return Err(Error::contract(format!(
                "batch lists differ in length: {} anchors, {} positives, {} ids",
                anchors.len(),
                positives.len(),
                item_ids.len()
            )));
        }
        Ok(BatchEmbeddings {
            anchors,
            positives,
            item_ids,
        })
    }

    pub fn len(&self) -> usize {
        self.anchors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.anchors.is_empty()
    }

    pub fn element(&self, choice: NegativeChoice) -> &Embedding {
        match choice.role {
            Role::Anchor => &self.anchors[choice.index],
            Role::Positive => &self.positives[choice.index],
        }
    }
}

/// Which textual element of a batch item.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Role {
    Anchor,
    Positive,
}

/// A negative: batch item `index`, element `role`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct NegativeChoice {
    pub index: usize,
    pub role: Role,
}

/// Hardest negative per anchor under angular distance.
pub fn mine_hard_negatives(batch: &BatchEmbeddings) -> Result<Vec<NegativeChoice>> {
    mine_hard_negatives_with(batch, DistanceKind::Angular)
}

/// Hardest negative per anchor under `kind`.
pub fn mine_hard_negatives_with(batch: &BatchEmbeddings, kind: DistanceKind) -> Result<Vec<NegativeChoice>> {
    let n = batch.len();
    if n < 2 {
        return Err(Error::MiningImpossible(n));
    }
    (0..n)
        .map(|i| {
            let anchor = &batch.anchors[i];
            let mut best: Option<(f64, NegativeChoice)> = None;
            for j in (0..n).filter(|&j| j != i) {
                for role in [Role::Anchor, Role::Positive] {
                    let choice = NegativeChoice { index: j, role };
                    let d = kind.distance(anchor, batch.element(choice))?;
                    if best.is_none_or(|(b, _)| d < b) {
                        best = Some((d, choice));
                    }
                }
            }
            Ok(best.expect("at least one candidate").1)
        })
        .collect()
}

/// Uniform draw over the other batch indices, per anchor.
pub fn sample_random_negatives<R: Rng + ?Sized>(batch_len: usize, rng: &mut R) -> Result<Vec<usize>> {
    if batch_len < 2 {
        return Err(Error::MiningImpossible(batch_len));
    }
    Ok((0..batch_len)
        .map(|i| {
            let j = rng.random_range(0..batch_len - 1);
            if j >= i {
                j + 1
            } else {
                j
            }
        })
        .collect())
}
