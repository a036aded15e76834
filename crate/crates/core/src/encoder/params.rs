use ndarray::{Array1, Array2, ArrayViewD, ArrayViewMutD};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{EncoderConfig, InitScheme};

pub const INIT_STD: f64 = 0.02;

/// Scale and shift of a layer normalisation.
#[derive(Debug, Clone, PartialEq)]
pub struct NormParams {
    pub gamma: Array1<f64>,
    pub beta: Array1<f64>,
}

impl NormParams {
    fn identity(width: usize) -> Self {
        NormParams {
            gamma: Array1::ones(width),
            beta: Array1::zeros(width),
        }
    }

    fn zeros(width: usize) -> Self {
        NormParams {
            gamma: Array1::zeros(width),
            beta: Array1::zeros(width),
        }
    }
}

/// One pre-norm transformer block.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams {
    pub attn_norm: NormParams,
    pub w_query: Array2<f64>,
    pub b_query: Array1<f64>,
    pub w_key: Array2<f64>,
    pub b_key: Array1<f64>,
    pub w_value: Array2<f64>,
    pub b_value: Array1<f64>,
    pub w_out: Array2<f64>,
    pub b_out: Array1<f64>,
    pub ff_norm: NormParams,
    pub w_ff_in: Array2<f64>,
    pub b_ff_in: Array1<f64>,
    pub w_ff_out: Array2<f64>,
    pub b_ff_out: Array1<f64>,
}

/// Every trainable array of the encoder. The same type doubles as the
/// gradient accumulator.
#[derive(Debug, Clone, PartialEq)]
pub struct Parameters {
    pub token_embedding: Array2<f64>,
    pub position_embedding: Array2<f64>,
    pub layers: Vec<LayerParams>,
    pub final_norm: NormParams,
    /// Masked-token prediction head, `d_model × vocab_size`.
    pub mlm_weight: Array2<f64>,
    pub mlm_bias: Array1<f64>,
}

macro_rules! tensor_list {
    ($p:expr, $view:ident, $iter:ident) => {{
        let p = $p;
        let mut out = Vec::new();
        out.push(("token_embedding".to_string(), p.token_embedding.$view().into_dyn()));
        out.push(("position_embedding".to_string(), p.position_embedding.$view().into_dyn()));
        for (i, l) in p.layers.$iter().enumerate() {
            let n = |s: &str| format!("layers.{i}.{s}");
            out.push((n("attn_norm.gamma"), l.attn_norm.gamma.$view().into_dyn()));
            out.push((n("attn_norm.beta"), l.attn_norm.beta.$view().into_dyn()));
            out.push((n("w_query"), l.w_query.$view().into_dyn()));
            out.push((n("b_query"), l.b_query.$view().into_dyn()));
            out.push((n("w_key"), l.w_key.$view().into_dyn()));
            out.push((n("b_key"), l.b_key.$view().into_dyn()));
            out.push((n("w_value"), l.w_value.$view().into_dyn()));
            out.push((n("b_value"), l.b_value.$view().into_dyn()));
            out.push((n("w_out"), l.w_out.$view().into_dyn()));
            out.push((n("b_out"), l.b_out.$view().into_dyn()));
            out.push((n("ff_norm.gamma"), l.ff_norm.gamma.$view().into_dyn()));
            out.push((n("ff_norm.beta"), l.ff_norm.beta.$view().into_dyn()));
            out.push((n("w_ff_in"), l.w_ff_in.$view().into_dyn()));
            out.push((n("b_ff_in"), l.b_ff_in.$view().into_dyn()));
            out.push((n("w_ff_out"), l.w_ff_out.$view().into_dyn()));
            out.push((n("b_ff_out"), l.b_ff_out.$view().into_dyn()));
        }
        out.push(("final_norm.gamma".to_string(), p.final_norm.gamma.$view().into_dyn()));
        out.push(("final_norm.beta".to_string(), p.final_norm.beta.$view().into_dyn()));
        out.push(("mlm_weight".to_string(), p.mlm_weight.$view().into_dyn()));
        out.push(("mlm_bias".to_string(), p.mlm_bias.$view().into_dyn()));
        out
    }};
}

impl Parameters {
    /// Seeded scaled-normal initialisation.
    pub fn init(cfg: &EncoderConfig) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let normal = Normal::new(0.0, INIT_STD).expect("valid std");
        let mut matrix = |rows: usize, cols: usize| {
            Array2::from_shape_simple_fn((rows, cols), || normal.sample(&mut rng))
        };
        let (d, f, v) = (cfg.d_model, cfg.ff_dim, cfg.vocab_size);
        let token_embedding = matrix(v, d);
        let position_embedding = matrix(cfg.max_seq_len, d);
        let layers = (0..cfg.n_layers)
            .map(|_| LayerParams {
                attn_norm: NormParams::identity(d),
                w_query: matrix(d, d),
                b_query: Array1::zeros(d),
                w_key: matrix(d, d),
                b_key: Array1::zeros(d),
                w_value: matrix(d, d),
                b_value: Array1::zeros(d),
                w_out: matrix(d, d),
                b_out: Array1::zeros(d),
                ff_norm: NormParams::identity(d),
                w_ff_in: matrix(d, f),
                b_ff_in: Array1::zeros(f),
                w_ff_out: matrix(f, d),
                b_ff_out: Array1::zeros(d),
            })
            .collect();
        let mlm_weight = matrix(d, v);
        let mut final_norm = NormParams::identity(d);
        if cfg.init == InitScheme::PositiveOrthant {
            // |x̂_j| <= sqrt(d - 1) after normalisation, so this shift puts
            // every token state strictly inside the positive orthant.
            final_norm.beta.fill((d as f64).sqrt());
        }
        Parameters {
            token_embedding,
            position_embedding,
            layers,
            final_norm,
            mlm_weight,
            mlm_bias: Array1::zeros(v),
        }
    }

    /// All-zero arrays with the shapes `cfg` implies.
    pub fn zeros(cfg: &EncoderConfig) -> Self {
        let (d, f, v) = (cfg.d_model, cfg.ff_dim, cfg.vocab_size);
        Parameters {
            token_embedding: Array2::zeros((v, d)),
            position_embedding: Array2::zeros((cfg.max_seq_len, d)),
            layers: (0..cfg.n_layers)
                .map(|_| LayerParams {
                    attn_norm: NormParams::zeros(d),
                    w_query: Array2::zeros((d, d)),
                    b_query: Array1::zeros(d),
                    w_key: Array2::zeros((d, d)),
                    b_key: Array1::zeros(d),
                    w_value: Array2::zeros((d, d)),
                    b_value: Array1::zeros(d),
                    w_out: Array2::zeros((d, d)),
                    b_out: Array1::zeros(d),
                    ff_norm: NormParams::zeros(d),
                    w_ff_in: Array2::zeros((d, f)),
                    b_ff_in: Array1::zeros(f),
                    w_ff_out: Array2::zeros((f, d)),
                    b_ff_out: Array1::zeros(d),
                })
                .collect(),
            final_norm: NormParams::zeros(d),
            mlm_weight: Array2::zeros((d, v)),
            mlm_bias: Array1::zeros(v),
        }
    }

    /// Named views in a fixed order shared by checkpoints and the optimizer.
    pub fn tensors(&self) -> Vec<(String, ArrayViewD<'_, f64>)> {
        tensor_list!(self, view, iter)
    }

    pub fn tensors_mut(&mut self) -> Vec<(String, ArrayViewMutD<'_, f64>)> {
        tensor_list!(self, view_mut, iter_mut)
    }

    pub fn num_values(&self) -> usize {
        self.tensors().iter().map(|(_, t)| t.len()).sum()
    }

    /// Flattened copy of every value, in [`Parameters::tensors`] order.
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_values());
        for (_, t) in self.tensors() {
            out.extend(t.iter());
        }
        out
    }

    /// Inverse of [`Parameters::flatten`].
    pub fn assign_flat(&mut self, values: &[f64]) {
        let mut offset = 0;
        for (_, mut t) in self.tensors_mut() {
            for x in t.iter_mut() {
                *x = values[offset];
                offset += 1;
            }
        }
        assert_eq!(offset, values.len(), "flat parameter length mismatch");
    }

    pub fn add_assign(&mut self, other: &Parameters) {
        for ((_, mut a), (_, b)) in self.tensors_mut().into_iter().zip(other.tensors()) {
            a.zip_mut_with(&b, |x, y| *x += *y);
        }
    }

    pub fn fill_zero(&mut self) {
        for (_, mut t) in self.tensors_mut() {
            t.fill(0.0);
        }
    }

    pub fn all_finite(&self) -> bool {
        self.tensors().iter().all(|(_, t)| t.iter().all(|x| x.is_finite()))
    }
}
