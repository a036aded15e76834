//! Pre-norm transformer forward pass with an explicit backward pass.
//!
//! Each block computes `x + Attn(LN(x))` followed by `x + FFN(LN(x))`; the
//! final layer norm produces the token states that are mean-pooled and fed
//! to the masked-token head.

use ndarray::{s, Array1, Array2, ArrayView1, Axis, Zip};

use super::params::{LayerParams, NormParams, Parameters};

const NORM_EPS: f64 = 1e-5;
const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2 / pi)
const GELU_K: f64 = 0.044_715;

pub(crate) struct NormCache {
    xhat: Array2<f64>,
    inv_std: Array1<f64>,
}

pub(crate) struct LayerCache {
    attn_norm: NormCache,
    normed_attn: Array2<f64>,
    query: Array2<f64>,
    key: Array2<f64>,
    value: Array2<f64>,
    /// Row-stochastic attention weights, one matrix per head.
    probs: Vec<Array2<f64>>,
    context: Array2<f64>,
    ff_norm: NormCache,
    normed_ff: Array2<f64>,
    ff_pre: Array2<f64>,
    ff_act: Array2<f64>,
}

/// Everything the backward pass needs from one forward pass.
pub struct ForwardTrace {
    pub(crate) token_ids: Vec<usize>,
    pub(crate) mask_positions: Vec<usize>,
    pub(crate) layers: Vec<LayerCache>,
    pub(crate) final_norm: NormCache,
    pub(crate) states: Array2<f64>,
}

fn add_bias(mut x: Array2<f64>, b: &Array1<f64>) -> Array2<f64> {
    x += &b.view().insert_axis(Axis(0));
    x
}

fn layer_norm(x: &Array2<f64>, p: &NormParams) -> (Array2<f64>, NormCache) {
    let rows = x.nrows();
    let mut xhat = x.clone();
    let mut inv_std = Array1::zeros(rows);
    for (r, mut row) in xhat.axis_iter_mut(Axis(0)).enumerate() {
        let mean = row.mean().unwrap_or(0.0);
        row.mapv_inplace(|v| v - mean);
        let var = row.iter().map(|v| v * v).sum::<f64>() / row.len() as f64;
        let inv = 1.0 / (var + NORM_EPS).sqrt();
        row.mapv_inplace(|v| v * inv);
        inv_std[r] = inv;
    }
    let y = &xhat * &p.gamma.view().insert_axis(Axis(0)) + p.beta.view().insert_axis(Axis(0));
    (y, NormCache { xhat, inv_std })
}

fn layer_norm_backward(
    dy: &Array2<f64>,
    cache: &NormCache,
    p: &NormParams,
    grad: &mut NormParams,
) -> Array2<f64> {
    grad.gamma += &(dy * &cache.xhat).sum_axis(Axis(0));
    grad.beta += &dy.sum_axis(Axis(0));
    let dxhat = dy * &p.gamma.view().insert_axis(Axis(0));
    let width = dy.ncols() as f64;
    let mut dx = Array2::zeros(dy.raw_dim());
    for r in 0..dy.nrows() {
        let g = dxhat.row(r);
        let xh = cache.xhat.row(r);
        let mean_g = g.sum() / width;
        let mean_gx = g.dot(&xh) / width;
        let inv = cache.inv_std[r];
        let mut out = dx.row_mut(r);
        for j in 0..g.len() {
            out[j] = inv * (g[j] - mean_g - xh[j] * mean_gx);
        }
    }
    dx
}

fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + (GELU_C * (x + GELU_K * x * x * x)).tanh())
}

fn gelu_grad(x: f64) -> f64 {
    let t = (GELU_C * (x + GELU_K * x * x * x)).tanh();
    0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * GELU_C * (1.0 + 3.0 * GELU_K * x * x)
}

fn softmax_rows(mut scores: Array2<f64>) -> Array2<f64> {
    for mut row in scores.axis_iter_mut(Axis(0)) {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.sum();
        row.mapv_inplace(|v| v / sum);
    }
    scores
}

fn accumulate_linear(
    input: &Array2<f64>,
    d_out: &Array2<f64>,
    w_grad: &mut Array2<f64>,
    b_grad: &mut Array1<f64>,
) {
    *w_grad += &input.t().dot(d_out);
    *b_grad += &d_out.sum_axis(Axis(0));
}

fn layer_forward(x: &Array2<f64>, p: &LayerParams, n_heads: usize) -> (Array2<f64>, LayerCache) {
    let (len, width) = x.dim();
    let head_dim = width / n_heads;
    let scale = 1.0 / (head_dim as f64).sqrt();

    let (normed_attn, attn_norm) = layer_norm(x, &p.attn_norm);
    let query = add_bias(normed_attn.dot(&p.w_query), &p.b_query);
    let key = add_bias(normed_attn.dot(&p.w_key), &p.b_key);
    let value = add_bias(normed_attn.dot(&p.w_value), &p.b_value);

    let mut context = Array2::zeros((len, width));
    let mut probs = Vec::with_capacity(n_heads);
    for h in 0..n_heads {
        let cols = s![.., h * head_dim..(h + 1) * head_dim];
        let q = query.slice(cols);
        let k = key.slice(cols);
        let v = value.slice(cols);
        let weights = softmax_rows(q.dot(&k.t()) * scale);
        context.slice_mut(cols).assign(&weights.dot(&v));
        probs.push(weights);
    }
    let attended = x + &add_bias(context.dot(&p.w_out), &p.b_out);

    let (normed_ff, ff_norm) = layer_norm(&attended, &p.ff_norm);
    let ff_pre = add_bias(normed_ff.dot(&p.w_ff_in), &p.b_ff_in);
    let ff_act = ff_pre.mapv(gelu);
    let out = &attended + &add_bias(ff_act.dot(&p.w_ff_out), &p.b_ff_out);

    let cache = LayerCache {
        attn_norm,
        normed_attn,
        query,
        key,
        value,
        probs,
        context,
        ff_norm,
        normed_ff,
        ff_pre,
        ff_act,
    };
    (out, cache)
}

fn layer_backward(
    d_out: Array2<f64>,
    p: &LayerParams,
    c: &LayerCache,
    g: &mut LayerParams,
) -> Array2<f64> {
    let (len, width) = d_out.dim();
    let n_heads = c.probs.len();
    let head_dim = width / n_heads;
    let scale = 1.0 / (head_dim as f64).sqrt();

    // feed-forward residual branch
    accumulate_linear(&c.ff_act, &d_out, &mut g.w_ff_out, &mut g.b_ff_out);
    let mut d_pre = d_out.dot(&p.w_ff_out.t());
    Zip::from(&mut d_pre)
        .and(&c.ff_pre)
        .for_each(|d, &x| *d *= gelu_grad(x));
    accumulate_linear(&c.normed_ff, &d_pre, &mut g.w_ff_in, &mut g.b_ff_in);
    let d_normed_ff = d_pre.dot(&p.w_ff_in.t());
    let d_attended = d_out + &layer_norm_backward(&d_normed_ff, &c.ff_norm, &p.ff_norm, &mut g.ff_norm);

    // attention residual branch
    accumulate_linear(&c.context, &d_attended, &mut g.w_out, &mut g.b_out);
    let d_context = d_attended.dot(&p.w_out.t());
    let mut d_query = Array2::zeros((len, width));
    let mut d_key = Array2::zeros((len, width));
    let mut d_value = Array2::zeros((len, width));
    for (h, weights) in c.probs.iter().enumerate() {
        let cols = s![.., h * head_dim..(h + 1) * head_dim];
        let d_ctx = d_context.slice(cols);
        d_value.slice_mut(cols).assign(&weights.t().dot(&d_ctx));
        let d_weights = d_ctx.dot(&c.value.slice(cols).t());
        let mut d_scores = Array2::zeros((len, len));
        for i in 0..len {
            let w = weights.row(i);
            let dw = d_weights.row(i);
            let inner = w.dot(&dw);
            let mut out = d_scores.row_mut(i);
            for j in 0..len {
                out[j] = w[j] * (dw[j] - inner) * scale;
            }
        }
        d_query.slice_mut(cols).assign(&d_scores.dot(&c.key.slice(cols)));
        d_key.slice_mut(cols).assign(&d_scores.t().dot(&c.query.slice(cols)));
    }
    accumulate_linear(&c.normed_attn, &d_query, &mut g.w_query, &mut g.b_query);
    accumulate_linear(&c.normed_attn, &d_key, &mut g.w_key, &mut g.b_key);
    accumulate_linear(&c.normed_attn, &d_value, &mut g.w_value, &mut g.b_value);
    let d_normed = d_query.dot(&p.w_query.t()) + d_key.dot(&p.w_key.t()) + d_value.dot(&p.w_value.t());
    d_attended + layer_norm_backward(&d_normed, &c.attn_norm, &p.attn_norm, &mut g.attn_norm)
}

/// Runs the encoder over `token_ids` and returns the final token states,
/// the masked-position score rows and the trace for [`backward`].
pub(crate) fn forward(
    params: &Parameters,
    n_heads: usize,
    token_ids: &[usize],
    mask_positions: &[usize],
) -> (Array2<f64>, ForwardTrace) {
    let len = token_ids.len();
    let mut x = Array2::zeros((len, params.token_embedding.ncols()));
    for (i, &id) in token_ids.iter().enumerate() {
        let mut row = x.row_mut(i);
        row += &params.token_embedding.row(id);
        row += &params.position_embedding.row(i);
    }
    let mut layers = Vec::with_capacity(params.layers.len());
    for p in &params.layers {
        let (next, cache) = layer_forward(&x, p, n_heads);
        layers.push(cache);
        x = next;
    }
    let (states, final_norm) = layer_norm(&x, &params.final_norm);
    let masked = states.select(Axis(0), mask_positions);
    let scores = add_bias(masked.dot(&params.mlm_weight), &params.mlm_bias);
    let trace = ForwardTrace {
        token_ids: token_ids.to_vec(),
        mask_positions: mask_positions.to_vec(),
        layers,
        final_norm,
        states,
    };
    (scores, trace)
}

/// Accumulates parameter gradients for upstream gradients on the pooled
/// vector and on the masked-position score rows.
pub(crate) fn backward(
    params: &Parameters,
    trace: &ForwardTrace,
    d_pooled: ArrayView1<'_, f64>,
    d_scores: &Array2<f64>,
    grads: &mut Parameters,
) {
    let (len, _) = trace.states.dim();
    let inv_len = 1.0 / len as f64;
    let mut d_states = Array2::from_shape_fn(trace.states.raw_dim(), |(_, j)| d_pooled[j] * inv_len);

    if !trace.mask_positions.is_empty() {
        let masked = trace.states.select(Axis(0), &trace.mask_positions);
        accumulate_linear(&masked, d_scores, &mut grads.mlm_weight, &mut grads.mlm_bias);
        let d_masked = d_scores.dot(&params.mlm_weight.t());
        for (r, &pos) in trace.mask_positions.iter().enumerate() {
            let mut row = d_states.row_mut(pos);
            row += &d_masked.row(r);
        }
    }

    let mut dx = layer_norm_backward(&d_states, &trace.final_norm, &params.final_norm, &mut grads.final_norm);
    for ((p, c), g) in params
        .layers
        .iter()
        .zip(&trace.layers)
        .zip(grads.layers.iter_mut())
        .rev()
    {
        dx = layer_backward(dx, p, c, g);
    }
    for (i, &id) in trace.token_ids.iter().enumerate() {
        let row = dx.row(i);
        let mut tok = grads.token_embedding.row_mut(id);
        tok += &row;
        let mut pos = grads.position_embedding.row_mut(i);
        pos += &row;
    }
}
