use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{TokenSequence, MASK_ID, NUM_SPECIAL};

/// Selection rate and the replacement rule applied to selected positions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaskingConfig {
    pub rate: f64,
    /// Probability a selected position becomes the mask token.
    pub mask_prob: f64,
    /// Probability a selected position becomes a random vocabulary token.
    /// The remainder is left unchanged.
    pub random_prob: f64,
}

impl MaskingConfig {
    pub fn with_rate(rate: f64) -> Self {
        MaskingConfig {
            rate,
            mask_prob: 0.8,
            random_prob: 0.1,
        }
    }

    pub fn disabled() -> Self {
        MaskingConfig::with_rate(0.0)
    }
}

impl Default for MaskingConfig {
    fn default() -> Self {
        MaskingConfig::with_rate(0.15)
    }
}

/// Selects each non-special position with probability `cfg.rate` and
/// applies the mask/random/keep replacement rule, recording the original
/// id of every selected position.
pub fn apply_masking<R: Rng + ?Sized>(
    token_ids: &[usize],
    cfg: &MaskingConfig,
    vocab_size: usize,
    rng: &mut R,
) -> TokenSequence {
    let mut seq = TokenSequence::unmasked(token_ids.to_vec());
    if cfg.rate <= 0.0 {
        return seq;
    }
    for (pos, id) in seq.token_ids.iter_mut().enumerate() {
        if *id < NUM_SPECIAL || !rng.random_bool(cfg.rate.min(1.0)) {
            continue;
        }
        seq.mask_positions.push(pos);
        seq.original_ids.push(*id);
        let u: f64 = rng.random();
        if u < cfg.mask_prob {
            *id = MASK_ID;
        } else if u < cfg.mask_prob + cfg.random_prob {
            *id = rng.random_range(NUM_SPECIAL..vocab_size);
        }
    }
    seq
}
