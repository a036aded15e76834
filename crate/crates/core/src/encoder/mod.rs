//! Toy-scale masked-language encoder.
//!
//! A token sequence is embedded, run through a stack of pre-norm
//! transformer blocks, and mean-pooled into one [`Embedding`]. The same
//! parameters serve every element of a triplet. Score rows for the
//! masked-token head are produced only at masked positions.

mod checkpoint;
mod masking;
mod params;
mod transformer;

use ndarray::{Array1, Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::geometry::Embedding;
use crate::{Error, Result};

pub use checkpoint::Checkpoint;
pub use masking::{apply_masking, MaskingConfig};
pub use params::{LayerParams, NormParams, Parameters, INIT_STD};
pub use transformer::ForwardTrace;

pub const PAD_ID: usize = 0;
pub const MASK_ID: usize = 1;
pub const UNK_ID: usize = 2;
/// Ids below this are special and never masked or sampled as replacements.
pub const NUM_SPECIAL: usize = 3;

/// How parameters are drawn at construction time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum InitScheme {
    #[default]
    Normal,
    /// Normal initialisation with the final norm shifted so that every
    /// token state, and hence every pooled embedding, starts in the
    /// positive orthant.
    PositiveOrthant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EncoderConfig {
    pub vocab_size: usize,
    pub d_model: usize,
    pub n_layers: usize,
    pub n_heads: usize,
    pub ff_dim: usize,
    pub max_seq_len: usize,
    pub seed: u64,
    #[serde(default)]
    pub init: InitScheme,
}

impl EncoderConfig {
    pub fn validate(&self) -> Result<()> {
        let dims = [
            ("vocab_size", self.vocab_size),
            ("d_model", self.d_model),
            ("n_layers", self.n_layers),
            ("n_heads", self.n_heads),
            ("ff_dim", self.ff_dim),
            ("max_seq_len", self.max_seq_len),
        ];
        if let Some((name, _)) = dims.iter().find(|(_, v)| *v == 0) {
            return Err(Error::Config(format!("{name} must be positive")));
        }
        if !self.d_model.is_multiple_of(self.n_heads) {
            return Err(Error::Config(format!(
                "d_model {} is not divisible by n_heads {}",
                self.d_model, self.n_heads
            )));
        }
        if self.vocab_size <= NUM_SPECIAL {
            return Err(Error::Config(format!(
                "vocab_size {} leaves no room beyond the {NUM_SPECIAL} special tokens",
                self.vocab_size
            )));
        }
        Ok(())
    }
}

/// Tokenised, optionally masked text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenSequence {
    pub token_ids: Vec<usize>,
    /// Strictly increasing positions selected for prediction.
    pub mask_positions: Vec<usize>,
    /// Original id at each entry of `mask_positions`.
    pub original_ids: Vec<usize>,
    pub attention_length: usize,
}

impl TokenSequence {
    pub fn unmasked(token_ids: Vec<usize>) -> Self {
        let attention_length = token_ids.len();
        TokenSequence {
            token_ids,
            mask_positions: Vec::new(),
            original_ids: Vec::new(),
            attention_length,
        }
    }

    pub fn attended(&self) -> &[usize] {
        &self.token_ids[..self.attention_length]
    }

    pub fn validate(&self, cfg: &EncoderConfig) -> Result<()> {
        let len = self.attention_length;
        if len == 0 {
            return Err(Error::contract("empty token sequence"));
        }
        if len > self.token_ids.len() {
            return Err(Error::contract(format!(
                "attention length {len} exceeds {} token ids",
                self.token_ids.len()
            )));
        }
        if len > cfg.max_seq_len {
            return Err(Error::contract(format!(
                "sequence of {len} tokens exceeds max_seq_len {}",
                cfg.max_seq_len
            )));
        }
        if let Some(id) = self.attended().iter().find(|&&id| id >= cfg.vocab_size) {
            return Err(Error::contract(format!(
                "token id {id} outside vocabulary of {}",
                cfg.vocab_size
            )));
        }
        if self.mask_positions.len() != self.original_ids.len() {
            return Err(Error::contract("mask positions and original ids differ in length"));
        }
        if self.mask_positions.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::contract("mask positions must be strictly increasing"));
        }
        if self.mask_positions.last().is_some_and(|&p| p >= len) {
            return Err(Error::contract("mask position beyond attention length"));
        }
        if self.original_ids.iter().any(|&id| id >= cfg.vocab_size) {
            return Err(Error::contract("original id outside vocabulary"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncoderOutput {
    /// `attention_length × d_model` final-layer states.
    pub token_states: Array2<f64>,
    /// Arithmetic mean of `token_states` rows.
    pub pooled: Embedding,
    /// One vocabulary score row per masked position.
    pub mlm_scores: Array2<f64>,
}

/// Upstream gradients on an [`EncoderOutput`].
#[derive(Debug, Clone, PartialEq)]
pub struct OutputGradient {
    pub pooled: Array1<f64>,
    pub mlm_scores: Array2<f64>,
}

impl OutputGradient {
    pub fn zeros(d_model: usize, n_masked: usize, vocab_size: usize) -> Self {
        OutputGradient {
            pooled: Array1::zeros(d_model),
            mlm_scores: Array2::zeros((n_masked, vocab_size)),
        }
    }
}

/// Encoder configuration plus the single parameter set shared by every
/// sequence it processes.
#[derive(Debug, Clone, PartialEq)]
pub struct Encoder {
    config: EncoderConfig,
    pub params: Parameters,
}

impl Encoder {
    pub fn new(config: EncoderConfig) -> Result<Self> {
        config.validate()?;
        let params = Parameters::init(&config);
        Ok(Encoder { config, params })
    }

    pub fn from_parts(config: EncoderConfig, params: Parameters) -> Result<Self> {
        config.validate()?;
        let expected = Parameters::zeros(&config);
        for ((name, a), (_, b)) in params.tensors().iter().zip(expected.tensors()) {
            if a.shape() != b.shape() {
                return Err(Error::contract(format!(
                    "parameter {name} has shape {:?}, expected {:?}",
                    a.shape(),
                    b.shape()
                )));
            }
        }
        if params.layers.len() != config.n_layers {
            return Err(Error::contract("layer count does not match config"));
        }
        Ok(Encoder { config, params })
    }

    pub fn config(&self) -> &EncoderConfig {
        &self.config
    }

    pub fn zero_gradients(&self) -> Parameters {
        Parameters::zeros(&self.config)
    }

    pub fn encode(&self, seq: &TokenSequence) -> Result<EncoderOutput> {
        Ok(self.forward(seq)?.0)
    }

    /// [`Encoder::encode`], also returning the trace for [`Encoder::backward`].
    pub fn forward(&self, seq: &TokenSequence) -> Result<(EncoderOutput, ForwardTrace)> {
        seq.validate(&self.config)?;
        let (scores, trace) =
            transformer::forward(&self.params, self.config.n_heads, seq.attended(), &seq.mask_positions);
        let pooled = trace
            .states
            .mean_axis(Axis(0))
            .expect("non-empty sequence")
            .to_vec();
        let out = EncoderOutput {
            token_states: trace.states.clone(),
            pooled: Embedding::new(pooled),
            mlm_scores: scores,
        };
        Ok((out, trace))
    }

    /// Adds the parameter gradients implied by `upstream` into `grads`.
    pub fn backward(
        &self,
        trace: &ForwardTrace,
        upstream: &OutputGradient,
        grads: &mut Parameters,
    ) -> Result<()> {
        if upstream.pooled.len() != self.config.d_model {
            return Err(Error::contract(format!(
                "pooled gradient has {} entries, expected {}",
                upstream.pooled.len(),
                self.config.d_model
            )));
        }
        let expected = (trace.mask_positions.len(), self.config.vocab_size);
        if upstream.mlm_scores.dim() != expected {
            return Err(Error::contract(format!(
                "score gradient has shape {:?}, expected {expected:?}",
                upstream.mlm_scores.dim()
            )));
        }
        transformer::backward(&self.params, trace, upstream.pooled.view(), &upstream.mlm_scores, grads);
        Ok(())
    }

    /// Fresh parameter gradients of one sequence for the given upstream
    /// gradients.
    pub fn gradients(&self, seq: &TokenSequence, upstream: &OutputGradient) -> Result<Parameters> {
        let (_, trace) = self.forward(seq)?;
        let mut grads = self.zero_gradients();
        self.backward(&trace, upstream, &mut grads)?;
        Ok(grads)
    }
}
