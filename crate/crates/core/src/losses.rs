//! Training objectives: margin triplet loss, the hinge pair losses used by
//! the contrastive and cosine ablations, masked-token cross-entropy and the
//! weighted combination of the masked-language and metric terms.

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::geometry::{cosine_gradient, cosine_similarity, DistanceKind};
use crate::{Error, Result};

pub const DEFAULT_MARGIN: f64 = 0.1;

/// Margin of the triplet hinge, in distance units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TripletLossConfig {
    pub margin: f64,
}

impl Default for TripletLossConfig {
    fn default() -> Self {
        TripletLossConfig {
            margin: DEFAULT_MARGIN,
        }
    }
}

impl TripletLossConfig {
    pub fn new(margin: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&margin) {
            return Err(Error::Config(format!("triplet margin {margin} outside [0, 1]")));
        }
        Ok(TripletLossConfig { margin })
    }
}

/// Positive and negative margins of `[m_pos - s_p]+ + [s_n - m_neg]+`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairLossConfig {
    pub pos_margin: f64,
    pub neg_margin: f64,
}

impl PairLossConfig {
    pub const CONTRASTIVE: PairLossConfig = PairLossConfig {
        pos_margin: 1.0,
        neg_margin: 0.0,
    };
    pub const COSINE: PairLossConfig = PairLossConfig {
        pos_margin: 1.0,
        neg_margin: -1.0,
    };

    pub fn new(pos_margin: f64, neg_margin: f64) -> Result<Self> {
        let in_range = |m: f64| (-1.0..=1.0).contains(&m);
        if !(in_range(pos_margin) && in_range(neg_margin) && pos_margin > neg_margin) {
            return Err(Error::Config(format!(
                "pair margins must satisfy -1 <= m_neg < m_pos <= 1, got ({pos_margin}, {neg_margin})"
            )));
        }
        Ok(PairLossConfig {
            pos_margin,
            neg_margin,
        })
    }
}

/// One step's loss components.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub mlm: f64,
    pub metric: f64,
    pub total: f64,
    pub lambda: f64,
}

impl LossBreakdown {
    pub fn is_finite(&self) -> bool {
        self.mlm.is_finite() && self.metric.is_finite() && self.total.is_finite()
    }
}

/// `L_total = L_mlm + λ · L_metric`.
pub fn total_loss(mlm: f64, metric: f64, lambda: f64) -> LossBreakdown {
    debug_assert!(lambda >= 0.0);
    LossBreakdown {
        mlm,
        metric,
        total: mlm + lambda * metric,
        lambda,
    }
}

/// Loss value of one triplet or pair together with the gradients with
/// respect to its three embeddings.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricTerm {
    pub loss: f64,
    pub anchor: Vec<f64>,
    pub positive: Vec<f64>,
    pub negative: Vec<f64>,
}

impl MetricTerm {
    fn inactive(loss: f64, dim: usize) -> Self {
        MetricTerm {
            loss,
            anchor: vec![0.0; dim],
            positive: vec![0.0; dim],
            negative: vec![0.0; dim],
        }
    }
}

/// `max(0, m + d(a, p) - d(a, n))` under angular distance.
pub fn triplet_loss(a: &[f64], p: &[f64], n: &[f64], cfg: TripletLossConfig) -> Result<f64> {
    Ok(triplet_term(a, p, n, cfg, DistanceKind::Angular)?.loss)
}

/// Triplet hinge under `kind`, with gradients. The gradients are exactly
/// zero when the hinge is inactive.
pub fn triplet_term(
    a: &[f64],
    p: &[f64],
    n: &[f64],
    cfg: TripletLossConfig,
    kind: DistanceKind,
) -> Result<MetricTerm> {
    let d_ap = kind.distance(a, p)?;
    let d_an = kind.distance(a, n)?;
    let arg = cfg.margin + d_ap - d_an;
    if arg <= 0.0 {
        return Ok(MetricTerm::inactive(0.0, a.len()));
    }
    let g_ap = kind.gradient(a, p)?;
    let g_an = kind.gradient(a, n)?;
    let g_pa = kind.gradient(p, a)?;
    let mut g_na = kind.gradient(n, a)?;
    g_na.iter_mut().for_each(|x| *x = -*x);
    Ok(MetricTerm {
        loss: arg,
        anchor: g_ap.iter().zip(&g_an).map(|(x, y)| x - y).collect(),
        positive: g_pa,
        negative: g_na,
    })
}

/// `[m_pos - s_p]+ + [s_n - m_neg]+` on cosine similarities.
pub fn pair_loss(s_p: f64, s_n: f64, cfg: PairLossConfig) -> f64 {
    (cfg.pos_margin - s_p).max(0.0) + (s_n - cfg.neg_margin).max(0.0)
}

/// Pair loss over embeddings `(a, p)` as the positive pair and `(a, n)` as
/// the negative pair, with gradients.
pub fn pair_term(a: &[f64], p: &[f64], n: &[f64], cfg: PairLossConfig) -> Result<MetricTerm> {
    let s_p = cosine_similarity(a, p)?;
    let s_n = cosine_similarity(a, n)?;
    let mut term = MetricTerm::inactive(pair_loss(s_p, s_n, cfg), a.len());
    if cfg.pos_margin - s_p > 0.0 {
        let ga = cosine_gradient(a, p)?;
        let gp = cosine_gradient(p, a)?;
        for i in 0..a.len() {
            term.anchor[i] -= ga[i];
            term.positive[i] -= gp[i];
        }
    }
    if s_n - cfg.neg_margin > 0.0 {
        let ga = cosine_gradient(a, n)?;
        let gn = cosine_gradient(n, a)?;
        for i in 0..a.len() {
            term.anchor[i] += ga[i];
            term.negative[i] += gn[i];
        }
    }
    Ok(term)
}

/// Mean cross-entropy of softmax-normalised score rows against the original
/// token ids at the masked positions. Zero when there are no rows.
pub fn mlm_loss(scores: ArrayView2<'_, f64>, targets: &[usize]) -> Result<f64> {
    Ok(mlm_loss_and_gradient(scores, targets)?.0)
}

/// [`mlm_loss`] and its gradient with respect to the score rows.
pub fn mlm_loss_and_gradient(
    scores: ArrayView2<'_, f64>,
    targets: &[usize],
) -> Result<(f64, Array2<f64>)> {
    let (rows, vocab) = scores.dim();
    if rows != targets.len() {
        return Err(Error::contract(format!(
            "{rows} score rows for {} masked targets",
            targets.len()
        )));
    }
    let mut grad = Array2::zeros((rows, vocab));
    if rows == 0 {
        return Ok((0.0, grad));
    }
    let inv = 1.0 / rows as f64;
    let mut total = 0.0;
    for (r, &target) in targets.iter().enumerate() {
        if target >= vocab {
            return Err(Error::contract(format!(
                "target id {target} outside vocabulary of {vocab}"
            )));
        }
        let row = scores.row(r);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = row.iter().map(|s| (s - max).exp()).sum();
        let log_z = max + sum.ln();
        total += log_z - row[target];
        let mut g = grad.row_mut(r);
        for (j, s) in row.iter().enumerate() {
            g[j] = (s - log_z).exp() * inv;
        }
        g[target] -= inv;
    }
    Ok((total * inv, grad))
}
