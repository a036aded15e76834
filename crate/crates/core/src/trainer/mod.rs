//! Training loop for the joint objective.
//!
//! Each step tokenises and masks the title (anchor) and description
//! (positive) of every batch item, runs one forward pass per element through
//! the shared encoder, picks negatives among the batch elements, and
//! minimises `L_mlm + λ · L_metric` with one optimizer update.

mod optimizer;

use std::path::Path;
use std::time::Instant;

use ndarray::{concatenate, Array1, Array2, Axis};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{Item, Vocabulary};
use crate::encoder::{
    apply_masking, Checkpoint, Encoder, EncoderConfig, EncoderOutput, ForwardTrace, InitScheme,
    MaskingConfig, OutputGradient, TokenSequence,
};
use crate::geometry::{DistanceKind, Embedding};
use crate::losses::{
    mlm_loss_and_gradient, pair_term, total_loss, triplet_term, LossBreakdown, MetricTerm,
    PairLossConfig, TripletLossConfig,
};
use crate::mining::{mine_hard_negatives_with, sample_random_negatives, BatchEmbeddings, NegativeChoice, Role};
use crate::util::{fmt6, read_to_string, write_atomic};
use crate::{Error, Result};

pub use optimizer::{AdamW, BETA1, BETA2, EPSILON, WEIGHT_DECAY};

pub const DEFAULT_SEED: u64 = 20_220_215;

/// The full method and its ablations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum LossVariant {
    /// Angular triplet loss, hard negatives, masked-language term.
    #[default]
    TripletHard,
    /// Negatives drawn uniformly from the other batch items.
    TripletRandom,
    /// Pair hinge with `(m_pos, m_neg) = (1, 0)`.
    ContrastivePair,
    /// Pair hinge with `(m_pos, m_neg) = (1, -1)`.
    CosinePair,
    /// Triplet loss and mining on `(1 - C) / 2` instead of angular distance.
    TripletCosineMetric,
    /// Full method without the masked-language term.
    TripletNoMlm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum NegativeSource {
    Hard,
    Random,
}

impl LossVariant {
    pub const ALL: [LossVariant; 6] = [
        LossVariant::TripletRandom,
        LossVariant::ContrastivePair,
        LossVariant::CosinePair,
        LossVariant::TripletCosineMetric,
        LossVariant::TripletNoMlm,
        LossVariant::TripletHard,
    ];

    pub fn name(self) -> &'static str {
        match self {
            LossVariant::TripletHard => "triplet_hard",
            LossVariant::TripletRandom => "triplet_random",
            LossVariant::ContrastivePair => "contrastive_pair",
            LossVariant::CosinePair => "cosine_pair",
            LossVariant::TripletCosineMetric => "triplet_cosine_metric",
            LossVariant::TripletNoMlm => "triplet_no_mlm",
        }
    }

    pub fn uses_mlm(self) -> bool {
        self != LossVariant::TripletNoMlm
    }

    pub fn distance(self) -> DistanceKind {
        match self {
            LossVariant::TripletCosineMetric => DistanceKind::HalfCosine,
            _ => DistanceKind::Angular,
        }
    }

    pub fn pair_config(self) -> Option<PairLossConfig> {
        match self {
            LossVariant::ContrastivePair => Some(PairLossConfig::CONTRASTIVE),
            LossVariant::CosinePair => Some(PairLossConfig::COSINE),
            _ => None,
        }
    }

    fn negatives(self) -> NegativeSource {
        match self {
            LossVariant::TripletRandom => NegativeSource::Random,
            _ => NegativeSource::Hard,
        }
    }
}

impl std::fmt::Display for LossVariant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Every knob of a training run, including the encoder shape. Serialised as
/// TOML; unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub steps: usize,
    pub learning_rate: f64,
    pub lambda: f64,
    pub margin: f64,
    pub loss_variant: LossVariant,
    pub mask_rate: f64,
    pub seed: u64,
    pub vocab_size: usize,
    pub d_model: usize,
    pub n_layers: usize,
    pub n_heads: usize,
    pub ff_dim: usize,
    pub max_seq_len: usize,
    pub init: InitScheme,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 8,
            steps: 2000,
            learning_rate: 1e-3,
            lambda: 1.0,
            margin: crate::losses::DEFAULT_MARGIN,
            loss_variant: LossVariant::TripletHard,
            mask_rate: 0.15,
            seed: DEFAULT_SEED,
            vocab_size: 512,
            d_model: 32,
            n_layers: 1,
            n_heads: 2,
            ff_dim: 64,
            max_seq_len: 64,
            init: InitScheme::Normal,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if self.batch_size < 2 {
            return fail(format!("batch_size {} < 2", self.batch_size));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return fail(format!("learning_rate {} must be finite and >= 0", self.learning_rate));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return fail(format!("lambda {} must be finite and >= 0", self.lambda));
        }
        if !(0.0..=1.0).contains(&self.mask_rate) {
            return fail(format!("mask_rate {} outside [0, 1]", self.mask_rate));
        }
        TripletLossConfig::new(self.margin)?;
        self.encoder_config().validate()
    }

    pub fn encoder_config(&self) -> EncoderConfig {
        EncoderConfig {
            vocab_size: self.vocab_size,
            d_model: self.d_model,
            n_layers: self.n_layers,
            n_heads: self.n_heads,
            ff_dim: self.ff_dim,
            max_seq_len: self.max_seq_len,
            seed: self.seed,
            init: self.init,
        }
    }

    pub fn masking(&self) -> MaskingConfig {
        if self.loss_variant.uses_mlm() {
            MaskingConfig::with_rate(self.mask_rate)
        } else {
            MaskingConfig::disabled()
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: TrainConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&read_to_string(path)?)
    }
}

/// An item tokenised against a fixed vocabulary, truncated to the encoder's
/// maximum length.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenizedItem {
    pub item_id: String,
    pub title: Vec<usize>,
    pub description: Vec<usize>,
}

/// Tokenises `items`, returning how many texts were truncated.
pub fn tokenize_items(items: &[Item], vocabulary: &Vocabulary, max_len: usize) -> Result<(Vec<TokenizedItem>, usize)> {
    let mut truncated = 0;
    let mut cut = |mut ids: Vec<usize>| {
        if ids.len() > max_len {
            ids.truncate(max_len);
            truncated += 1;
        }
        ids
    };
    let mut out = Vec::with_capacity(items.len());
    for item in items {
        let title = cut(vocabulary.tokenize(&item.title));
        let description = cut(vocabulary.tokenize(&item.description));
        if title.is_empty() || description.is_empty() {
            return Err(Error::ingestion(
                format!("item {}", item.item_id),
                "missing title or description",
            ));
        }
        out.push(TokenizedItem {
            item_id: item.item_id.clone(),
            title,
            description,
        });
    }
    Ok((out, truncated))
}

/// The masked anchor/positive sequences of one batch. Sequence `2i` is the
/// anchor (title) of item `i`, sequence `2i + 1` its positive (description).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TripletBatch {
    pub item_ids: Vec<String>,
    pub sequences: Vec<TokenSequence>,
}

impl TripletBatch {
    pub fn len(&self) -> usize {
        self.item_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.item_ids.is_empty()
    }

    pub fn anchor(&self, i: usize) -> &TokenSequence {
        &self.sequences[2 * i]
    }

    pub fn positive(&self, i: usize) -> &TokenSequence {
        &self.sequences[2 * i + 1]
    }
}

/// Masks the two elements of every item. Negatives are chosen later, from
/// the pooled embeddings of the same batch.
pub fn build_triplets<R: Rng + ?Sized>(
    items: &[TokenizedItem],
    masking: &MaskingConfig,
    vocab_size: usize,
    rng: &mut R,
) -> Result<TripletBatch> {
    if items.len() < 2 {
        return Err(Error::MiningImpossible(items.len()));
    }
    let mut sequences = Vec::with_capacity(2 * items.len());
    for item in items {
        if item.title.is_empty() || item.description.is_empty() {
            return Err(Error::ingestion(format!("item {}", item.item_id), "missing title or description"));
        }
        sequences.push(apply_masking(&item.title, masking, vocab_size, rng));
        sequences.push(apply_masking(&item.description, masking, vocab_size, rng));
    }
    Ok(TripletBatch {
        item_ids: items.iter().map(|i| i.item_id.clone()).collect(),
        sequences,
    })
}

/// Metric loss of a batch and its gradient on every pooled embedding
/// (indexed like [`TripletBatch::sequences`]).
#[derive(Debug, Clone, PartialEq)]
pub struct MetricObjective {
    pub loss: f64,
    pub pooled_grads: Vec<Vec<f64>>,
    /// Sequence index used as the negative of each anchor.
    pub negatives: Vec<usize>,
}

fn sequence_index(choice: NegativeChoice) -> usize {
    match choice.role {
        Role::Anchor => 2 * choice.index,
        Role::Positive => 2 * choice.index + 1,
    }
}

/// Mean per-item metric loss for `variant` over a batch of pooled
/// embeddings, with gradients.
pub fn metric_objective<R: Rng + ?Sized>(
    batch: &BatchEmbeddings,
    variant: LossVariant,
    margin: f64,
    rng: &mut R,
) -> Result<MetricObjective> {
    let n = batch.len();
    let kind = variant.distance();
    let choices: Vec<NegativeChoice> = match variant.negatives() {
        NegativeSource::Hard => mine_hard_negatives_with(batch, kind)?,
        NegativeSource::Random => sample_random_negatives(n, rng)?
            .into_iter()
            .map(|index| NegativeChoice {
                index,
                role: Role::Positive,
            })
            .collect(),
    };
    let dim = batch.anchors[0].dim();
    let mut pooled_grads = vec![vec![0.0; dim]; 2 * n];
    let triplet_cfg = TripletLossConfig::new(margin)?;
    let inv = 1.0 / n as f64;
    let mut loss = 0.0;
    for (i, &choice) in choices.iter().enumerate() {
        let (a, p, neg) = (&batch.anchors[i], &batch.positives[i], batch.element(choice));
        let term: MetricTerm = match variant.pair_config() {
            Some(cfg) => pair_term(a, p, neg, cfg)?,
            None => triplet_term(a, p, neg, triplet_cfg, kind)?,
        };
        loss += term.loss;
        for (slot, g) in [(2 * i, &term.anchor), (2 * i + 1, &term.positive), (sequence_index(choice), &term.negative)] {
            for (acc, x) in pooled_grads[slot].iter_mut().zip(g) {
                *acc += x * inv;
            }
        }
    }
    Ok(MetricObjective {
        loss: loss * inv,
        pooled_grads,
        negatives: choices.into_iter().map(sequence_index).collect(),
    })
}

/// Loss components and diagnostics of one optimizer step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub breakdown: LossBreakdown,
    /// Cosine similarity between each anchor and its chosen negative.
    pub negative_cosines: Vec<f64>,
}

/// One optimizer step over a batch: forward passes, negative selection,
/// joint loss, backward passes, update.
pub fn train_step<R: Rng + ?Sized>(
    encoder: &mut Encoder,
    optimizer: &mut AdamW,
    batch: &TripletBatch,
    config: &TrainConfig,
    step_index: usize,
    rng: &mut R,
) -> Result<StepOutcome> {
    let variant = config.loss_variant;
    let mut outputs: Vec<EncoderOutput> = Vec::with_capacity(batch.sequences.len());
    let mut traces: Vec<ForwardTrace> = Vec::with_capacity(batch.sequences.len());
    for seq in &batch.sequences {
        let (out, trace) = encoder.forward(seq)?;
        outputs.push(out);
        traces.push(trace);
    }

    // masked-language term, averaged over every masked position in the batch
    let mut score_grads: Vec<Array2<f64>> = outputs.iter().map(|o| Array2::zeros(o.mlm_scores.raw_dim())).collect();
    let mut mlm = 0.0;
    if variant.uses_mlm() {
        let views: Vec<_> = outputs.iter().map(|o| o.mlm_scores.view()).collect();
        let scores = concatenate(Axis(0), &views).map_err(|e| Error::contract(e.to_string()))?;
        let targets: Vec<usize> = batch.sequences.iter().flat_map(|s| s.original_ids.iter().copied()).collect();
        let (loss, grad) = mlm_loss_and_gradient(scores.view(), &targets)?;
        mlm = loss;
        let mut row = 0;
        for g in score_grads.iter_mut() {
            let rows = g.nrows();
            g.assign(&grad.slice(ndarray::s![row..row + rows, ..]));
            row += rows;
        }
    }

    let embeddings = BatchEmbeddings::new(
        (0..batch.len()).map(|i| outputs[2 * i].pooled.clone()).collect(),
        (0..batch.len()).map(|i| outputs[2 * i + 1].pooled.clone()).collect(),
        batch.item_ids.clone(),
    )?;
    let metric = metric_objective(&embeddings, variant, config.margin, rng)?;
    let negative_cosines = (0..batch.len())
        .map(|i| {
            crate::geometry::cosine_similarity(&outputs[2 * i].pooled, &outputs[metric.negatives[i]].pooled)
        })
        .collect::<Result<Vec<_>>>()?;

    let breakdown = total_loss(mlm, metric.loss, config.lambda);
    if !breakdown.is_finite() {
        return Err(Error::Divergence {
            step: step_index,
            breakdown,
        });
    }

    let mut grads = encoder.zero_gradients();
    for ((trace, pooled), mlm_scores) in traces.iter().zip(&metric.pooled_grads).zip(score_grads) {
        let upstream = OutputGradient {
            pooled: Array1::from_iter(pooled.iter().map(|g| g * config.lambda)),
            mlm_scores,
        };
        encoder.backward(trace, &upstream, &mut grads)?;
    }
    optimizer.step(&mut encoder.params, &grads);
    if !encoder.params.all_finite() {
        return Err(Error::Divergence {
            step: step_index,
            breakdown,
        });
    }
    Ok(StepOutcome {
        breakdown,
        negative_cosines,
    })
}

/// Result of [`train`].
#[derive(Debug, Clone)]
pub struct TrainReport {
    pub losses: Vec<LossBreakdown>,
    /// Smallest anchor–negative cosine similarity observed in each step.
    pub min_negative_cosine: Vec<f64>,
    pub checkpoint: Checkpoint,
    pub wall_seconds: f64,
    /// Texts cut to the encoder's maximum length.
    pub truncated_texts: usize,
}

impl TrainReport {
    /// `step,mlm,metric,total` with six decimals.
    pub fn metrics_csv(&self) -> String {
        let mut out = String::from("step,mlm,metric,total\n");
        for (i, b) in self.losses.iter().enumerate() {
            out.push_str(&format!("{},{},{},{}\n", i, fmt6(b.mlm), fmt6(b.metric), fmt6(b.total)));
        }
        out
    }

    pub fn write_metrics(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.metrics_csv().as_bytes())
    }
}

/// Builds the vocabulary, initialises the encoder from the seed, and runs
/// `config.steps` steps over per-epoch shuffles of `items`. An incomplete
/// trailing batch of an epoch is skipped.
pub fn train(items: &[Item], config: &TrainConfig) -> Result<TrainReport> {
    config.validate()?;
    if items.is_empty() {
        return Err(Error::ingestion("dataset", "empty dataset"));
    }
    if items.len() < config.batch_size {
        return Err(Error::ingestion(
            "dataset",
            format!("{} items, fewer than batch_size {}", items.len(), config.batch_size),
        ));
    }
    let started = Instant::now();
    let vocabulary = Vocabulary::build(
        items.iter().flat_map(|i| [i.title.as_str(), i.description.as_str()]),
        config.vocab_size,
    );
    let (tokenized, truncated_texts) = tokenize_items(items, &vocabulary, config.max_seq_len)?;
    let mut encoder = Encoder::new(config.encoder_config())?;
    let mut optimizer = AdamW::new(config.learning_rate, encoder.params.num_values());
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(1));
    let masking = config.masking();

    let mut losses = Vec::with_capacity(config.steps);
    let mut min_negative_cosine = Vec::with_capacity(config.steps);
    let mut order: Vec<usize> = (0..tokenized.len()).collect();
    let batches_per_epoch = tokenized.len() / config.batch_size;
    let mut step = 0;
    while step < config.steps {
        order.shuffle(&mut rng);
        for chunk in order.chunks_exact(config.batch_size).take(batches_per_epoch) {
            if step == config.steps {
                break;
            }
            let members: Vec<TokenizedItem> = chunk.iter().map(|&i| tokenized[i].clone()).collect();
            let batch = build_triplets(&members, &masking, config.vocab_size, &mut rng)?;
            let outcome = train_step(&mut encoder, &mut optimizer, &batch, config, step, &mut rng)?;
            losses.push(outcome.breakdown);
            min_negative_cosine.push(outcome.negative_cosines.iter().copied().fold(f64::INFINITY, f64::min));
            step += 1;
        }
    }

    Ok(TrainReport {
        losses,
        min_negative_cosine,
        checkpoint: Checkpoint { encoder, vocabulary },
        wall_seconds: started.elapsed().as_secs_f64(),
        truncated_texts,
    })
}

/// Pooled title and description embeddings of `item` without masking.
pub fn embed_pair(encoder: &Encoder, item: &TokenizedItem) -> Result<(Embedding, Embedding)> {
    let title = encoder.encode(&TokenSequence::unmasked(item.title.clone()))?.pooled;
    let description = encoder.encode(&TokenSequence::unmasked(item.description.clone()))?.pooled;
    Ok((title, description))
}

#[cfg(test)]
mod tests;
