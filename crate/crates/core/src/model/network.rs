//! Forward and backward passes of the tagger.
//!
//! token + position embedding, then per encoder layer
//! `h = LN(x + Attn(x))`, `x' = LN(h + FFN(h))`, then a linear label head.
//! Attention is single-head scaled dot-product; the feed-forward block uses
//! tanh-approximated GELU.

use super::config::{Context, ModelConfig, MAX_SEQ_LEN};
use super::params::*;
use crate::cl::TrainingObjective;
use crate::error::{Error, Result};

const LN_EPS: f64 = 1e-5;
const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)
const GELU_A: f64 = 0.044_715;

/// One encoded training sentence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Example {
    pub tokens: Vec<u32>,
    pub labels: Vec<u32>,
}

// out[m×n] = a[m×k] · b[k×n]
fn matmul(a: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
    let mut out = vec![0.0; m * n];
    for i in 0..m {
        let row = &mut out[i * n..(i + 1) * n];
        for p in 0..k {
            let aip = a[i * k + p];
            if aip == 0.0 {
                continue;
            }
            let brow = &b[p * n..(p + 1) * n];
            for (o, &bv) in row.iter_mut().zip(brow) {
                *o += aip * bv;
            }
        }
    }
    out
}

// out[k×n] += aᵀ · b where a is m×k and b is m×n
fn matmul_at_b_acc(a: &[f64], b: &[f64], m: usize, k: usize, n: usize, out: &mut [f64]) {
    for i in 0..m {
        let brow = &b[i * n..(i + 1) * n];
        for p in 0..k {
            let aip = a[i * k + p];
            if aip == 0.0 {
                continue;
            }
            let orow = &mut out[p * n..(p + 1) * n];
            for (o, &bv) in orow.iter_mut().zip(brow) {
                *o += aip * bv;
            }
        }
    }
}

// out[m×k] = a[m×n] · bᵀ where b is k×n
fn matmul_a_bt(a: &[f64], b: &[f64], m: usize, n: usize, k: usize) -> Vec<f64> {
    let mut out = vec![0.0; m * k];
    for i in 0..m {
        let arow = &a[i * n..(i + 1) * n];
        for j in 0..k {
            let brow = &b[j * n..(j + 1) * n];
            out[i * k + j] = arow.iter().zip(brow).map(|(x, y)| x * y).sum();
        }
    }
    out
}

fn add_bias(x: &mut [f64], bias: &[f64]) {
    for row in x.chunks_mut(bias.len()) {
        for (v, b) in row.iter_mut().zip(bias) {
            *v += b;
        }
    }
}

fn col_sum_acc(x: &[f64], width: usize, out: &mut [f64]) {
    for row in x.chunks(width) {
        for (o, v) in out.iter_mut().zip(row) {
            *o += v;
        }
    }
}

fn softmax_in_place(row: &mut [f64]) {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in row.iter_mut() {
        *v /= sum;
    }
}

fn attends(context: Context, i: usize, j: usize) -> bool {
    match context {
        Context::Full => true,
        Context::Window(w) => i.abs_diff(j) <= w,
    }
}

struct LayerNormOut {
    y: Vec<f64>,
    xhat: Vec<f64>,
    inv_std: Vec<f64>,
}

fn layer_norm(x: &[f64], gain: &[f64], bias: &[f64]) -> LayerNormOut {
    let d = gain.len();
    let rows = x.len() / d;
    let mut y = vec![0.0; x.len()];
    let mut xhat = vec![0.0; x.len()];
    let mut inv_std = vec![0.0; rows];
    for r in 0..rows {
        let row = &x[r * d..(r + 1) * d];
        let mean = row.iter().sum::<f64>() / d as f64;
        let var = row.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / d as f64;
        let is = 1.0 / (var + LN_EPS).sqrt();
        inv_std[r] = is;
        for c in 0..d {
            let xh = (row[c] - mean) * is;
            xhat[r * d + c] = xh;
            y[r * d + c] = gain[c] * xh + bias[c];
        }
    }
    LayerNormOut { y, xhat, inv_std }
}

/// Returns the gradient w.r.t. the layer-norm input; accumulates gain/bias grads.
fn layer_norm_backward(
    dy: &[f64],
    cache: &LayerNormOut,
    gain: &[f64],
    dgain: &mut [f64],
    dbias: &mut [f64],
) -> Vec<f64> {
    let d = gain.len();
    let rows = dy.len() / d;
    let mut dx = vec![0.0; dy.len()];
    let mut dxhat = vec![0.0; d];
    for r in 0..rows {
        let dyr = &dy[r * d..(r + 1) * d];
        let xh = &cache.xhat[r * d..(r + 1) * d];
        for c in 0..d {
            dgain[c] += dyr[c] * xh[c];
            dbias[c] += dyr[c];
            dxhat[c] = dyr[c] * gain[c];
        }
        let mean_dxhat = dxhat.iter().sum::<f64>() / d as f64;
        let mean_dxhat_xhat = dxhat.iter().zip(xh).map(|(a, b)| a * b).sum::<f64>() / d as f64;
        let is = cache.inv_std[r];
        for c in 0..d {
            dx[r * d + c] = is * (dxhat[c] - mean_dxhat - xh[c] * mean_dxhat_xhat);
        }
    }
    dx
}

fn gelu(u: f64) -> f64 {
    0.5 * u * (1.0 + (GELU_C * (u + GELU_A * u * u * u)).tanh())
}

fn gelu_grad(u: f64) -> f64 {
    let t = (GELU_C * (u + GELU_A * u * u * u)).tanh();
    0.5 * (1.0 + t) + 0.5 * u * (1.0 - t * t) * GELU_C * (1.0 + 3.0 * GELU_A * u * u)
}

struct LayerCache {
    x: Vec<f64>,
    q: Vec<f64>,
    k: Vec<f64>,
    v: Vec<f64>,
    attn: Vec<f64>,
    ctx: Vec<f64>,
    ln1: LayerNormOut,
    pre_act: Vec<f64>,
    act: Vec<f64>,
    ln2: LayerNormOut,
}

struct ForwardCache {
    layers: Vec<LayerCache>,
    /// Final encoder representation, n×d.
    hidden: Vec<f64>,
    /// Label probabilities, n×C.
    probs: Vec<f64>,
}

fn check_tokens(config: &ModelConfig, tokens: &[u32]) -> Result<()> {
    if tokens.is_empty() {
        return Err(Error::Input("empty token sequence".into()));
    }
    if tokens.len() > MAX_SEQ_LEN {
        return Err(Error::Input(format!(
            "sequence of {} tokens exceeds the {MAX_SEQ_LEN}-token limit",
            tokens.len()
        )));
    }
    if let Some(&bad) = tokens.iter().find(|&&t| t as usize >= config.vocab_size) {
        return Err(Error::Input(format!(
            "token id {bad} out of range for vocabulary of size {}",
            config.vocab_size
        )));
    }
    Ok(())
}

fn run_forward(config: &ModelConfig, params: &ParameterSet, tokens: &[u32], with_head: bool) -> ForwardCache {
    let n = tokens.len();
    let d = config.embed_dim;
    let h = config.hidden_dim;
    let embed = params.data(EMBED);
    let pos = params.data(POS);
    let mut x = vec![0.0; n * d];
    for (t, &tok) in tokens.iter().enumerate() {
        let e = &embed[tok as usize * d..(tok as usize + 1) * d];
        let p = &pos[t * d..(t + 1) * d];
        for c in 0..d {
            x[t * d + c] = e[c] + p[c];
        }
    }
    let scale = 1.0 / (d as f64).sqrt();
    let mut layers = Vec::with_capacity(config.num_layers);
    for l in 0..config.num_layers {
        let b = layer_base(l);
        let q = matmul(&x, params.data(b + WQ), n, d, d);
        let k = matmul(&x, params.data(b + WK), n, d, d);
        let v = matmul(&x, params.data(b + WV), n, d, d);
        let mut attn = matmul_a_bt(&q, &k, n, d, n);
        for i in 0..n {
            let row = &mut attn[i * n..(i + 1) * n];
            for (j, s) in row.iter_mut().enumerate() {
                *s = if attends(config.context, i, j) { *s * scale } else { f64::NEG_INFINITY };
            }
            softmax_in_place(row);
        }
        let ctx = matmul(&attn, &v, n, n, d);
        let mut r1 = matmul(&ctx, params.data(b + WO), n, d, d);
        add_bias(&mut r1, params.data(b + BO));
        for (a, xi) in r1.iter_mut().zip(&x) {
            *a += xi;
        }
        let ln1 = layer_norm(&r1, params.data(b + LN1_G), params.data(b + LN1_B));
        let mut pre_act = matmul(&ln1.y, params.data(b + W1), n, d, h);
        add_bias(&mut pre_act, params.data(b + B1));
        let act: Vec<f64> = pre_act.iter().map(|&u| gelu(u)).collect();
        let mut r2 = matmul(&act, params.data(b + W2), n, h, d);
        add_bias(&mut r2, params.data(b + B2));
        for (a, hi) in r2.iter_mut().zip(&ln1.y) {
            *a += hi;
        }
        let ln2 = layer_norm(&r2, params.data(b + LN2_G), params.data(b + LN2_B));
        let next = ln2.y.clone();
        layers.push(LayerCache { x, q, k, v, attn, ctx, ln1, pre_act, act, ln2 });
        x = next;
    }
    let probs = if with_head {
        let c = config.num_labels;
        let mut logits = matmul(&x, params.data(head_w(config.num_layers)), n, d, c);
        add_bias(&mut logits, params.data(head_b(config.num_layers)));
        for row in logits.chunks_mut(c) {
            softmax_in_place(row);
        }
        logits
    } else {
        Vec::new()
    };
    ForwardCache { layers, hidden: x, probs }
}

/// Accumulates into `grad` the gradient of `sum_t weight * -log p(label_t)`.
fn run_backward(
    config: &ModelConfig,
    params: &ParameterSet,
    ex: &Example,
    cache: &ForwardCache,
    weight: f64,
    grad: &mut ParameterSet,
) {
    let n = ex.tokens.len();
    let d = config.embed_dim;
    let h = config.hidden_dim;
    let c = config.num_labels;
    let nl = config.num_layers;

    let mut dlogits = cache.probs.clone();
    for (t, &y) in ex.labels.iter().enumerate() {
        dlogits[t * c + y as usize] -= 1.0;
    }
    for v in dlogits.iter_mut() {
        *v *= weight;
    }
    matmul_at_b_acc(&cache.hidden, &dlogits, n, d, c, grad.data_mut(head_w(nl)));
    col_sum_acc(&dlogits, c, grad.data_mut(head_b(nl)));
    let mut dx = matmul_a_bt(&dlogits, params.data(head_w(nl)), n, c, d);

    let scale = 1.0 / (d as f64).sqrt();
    for l in (0..nl).rev() {
        let b = layer_base(l);
        let lc = &cache.layers[l];

        // x' = LN2(h + FFN(h))
        let dr2 = {
            let (g, rest) = split_two(grad, b + LN2_G, b + LN2_B);
            layer_norm_backward(&dx, &lc.ln2, params.data(b + LN2_G), g, rest)
        };
        matmul_at_b_acc(&lc.act, &dr2, n, h, d, grad.data_mut(b + W2));
        col_sum_acc(&dr2, d, grad.data_mut(b + B2));
        let mut dpre = matmul_a_bt(&dr2, params.data(b + W2), n, d, h);
        for (g, &u) in dpre.iter_mut().zip(&lc.pre_act) {
            *g *= gelu_grad(u);
        }
        matmul_at_b_acc(&lc.ln1.y, &dpre, n, d, h, grad.data_mut(b + W1));
        col_sum_acc(&dpre, h, grad.data_mut(b + B1));
        let mut dh = matmul_a_bt(&dpre, params.data(b + W1), n, h, d);
        for (a, r) in dh.iter_mut().zip(&dr2) {
            *a += r;
        }

        // h = LN1(x + Attn(x))
        let dr1 = {
            let (g, rest) = split_two(grad, b + LN1_G, b + LN1_B);
            layer_norm_backward(&dh, &lc.ln1, params.data(b + LN1_G), g, rest)
        };
        matmul_at_b_acc(&lc.ctx, &dr1, n, d, d, grad.data_mut(b + WO));
        col_sum_acc(&dr1, d, grad.data_mut(b + BO));
        let dctx = matmul_a_bt(&dr1, params.data(b + WO), n, d, d);
        let mut dattn = matmul_a_bt(&dctx, &lc.v, n, d, n);
        let mut dv = vec![0.0; n * d];
        matmul_at_b_acc(&lc.attn, &dctx, n, n, d, &mut dv);
        for i in 0..n {
            let a = &lc.attn[i * n..(i + 1) * n];
            let da = &mut dattn[i * n..(i + 1) * n];
            let dot: f64 = a.iter().zip(da.iter()).map(|(x, y)| x * y).sum();
            for (g, &p) in da.iter_mut().zip(a) {
                *g = p * (*g - dot) * scale;
            }
        }
        // dattn now holds dS (pre-softmax, already scaled)
        let dq = matmul(&dattn, &lc.k, n, n, d);
        let mut dk = vec![0.0; n * d];
        matmul_at_b_acc(&dattn, &lc.q, n, n, d, &mut dk);

        matmul_at_b_acc(&lc.x, &dq, n, d, d, grad.data_mut(b + WQ));
        matmul_at_b_acc(&lc.x, &dk, n, d, d, grad.data_mut(b + WK));
        matmul_at_b_acc(&lc.x, &dv, n, d, d, grad.data_mut(b + WV));
        let mut dxl = dr1;
        for (w, dm) in [(WQ, &dq), (WK, &dk), (WV, &dv)] {
            let part = matmul_a_bt(dm, params.data(b + w), n, d, d);
            for (a, p) in dxl.iter_mut().zip(&part) {
                *a += p;
            }
        }
        dx = dxl;
    }

    let (dembed, dpos) = split_two(grad, EMBED, POS);
    for (t, &tok) in ex.tokens.iter().enumerate() {
        let row = &dx[t * d..(t + 1) * d];
        let e = &mut dembed[tok as usize * d..(tok as usize + 1) * d];
        for (a, g) in e.iter_mut().zip(row) {
            *a += g;
        }
        let p = &mut dpos[t * d..(t + 1) * d];
        for (a, g) in p.iter_mut().zip(row) {
            *a += g;
        }
    }
}

/// Mutable access to two distinct tensors, `i < j`.
fn split_two(set: &mut ParameterSet, i: usize, j: usize) -> (&mut [f64], &mut [f64]) {
    debug_assert!(i < j);
    let tensors = set.tensors_mut();
    let (lo, hi) = tensors.split_at_mut(j);
    (&mut lo[i].data, &mut hi[0].data)
}

/// Per-token label distributions.
pub fn forward(config: &ModelConfig, params: &ParameterSet, tokens: &[u32]) -> Result<Vec<Vec<f64>>> {
    check_tokens(config, tokens)?;
    let cache = run_forward(config, params, tokens, true);
    Ok(cache.probs.chunks(config.num_labels).map(<[f64]>::to_vec).collect())
}

/// Argmax label index per position; ties go to the lowest index.
pub fn predict_labels(config: &ModelConfig, params: &ParameterSet, tokens: &[u32]) -> Result<Vec<u32>> {
    Ok(forward(config, params, tokens)?
        .iter()
        .map(|dist| {
            let mut best = 0;
            for (i, &p) in dist.iter().enumerate() {
                if p > dist[best] {
                    best = i;
                }
            }
            best as u32
        })
        .collect())
}

/// Final encoder-layer representation of every token.
pub fn embed_tokens(config: &ModelConfig, params: &ParameterSet, tokens: &[u32]) -> Result<Vec<Vec<f64>>> {
    check_tokens(config, tokens)?;
    let cache = run_forward(config, params, tokens, false);
    Ok(cache.hidden.chunks(config.embed_dim).map(<[f64]>::to_vec).collect())
}

fn check_example(config: &ModelConfig, ex: &Example) -> Result<()> {
    check_tokens(config, &ex.tokens)?;
    if ex.labels.len() != ex.tokens.len() {
        return Err(Error::Input(format!(
            "{} labels for {} tokens",
            ex.labels.len(),
            ex.tokens.len()
        )));
    }
    if let Some(&bad) = ex.labels.iter().find(|&&y| y as usize >= config.num_labels) {
        return Err(Error::Input(format!("label {bad} out of range for {} labels", config.num_labels)));
    }
    Ok(())
}

/// Mean per-token cross-entropy over the batch plus any objective penalty,
/// and its exact gradient.
pub fn loss_and_grad(
    config: &ModelConfig,
    params: &ParameterSet,
    batch: &[Example],
    objective: &TrainingObjective,
) -> Result<(f64, ParameterSet)> {
    if batch.is_empty() {
        return Err(Error::Input("empty batch".into()));
    }
    for ex in batch {
        check_example(config, ex)?;
    }
    let total_tokens: usize = batch.iter().map(|e| e.tokens.len()).sum();
    let weight = 1.0 / total_tokens as f64;
    let mut grad = params.zeros_like();
    let mut loss = 0.0;
    for ex in batch {
        let cache = run_forward(config, params, &ex.tokens, true);
        let c = config.num_labels;
        for (t, &y) in ex.labels.iter().enumerate() {
            loss -= cache.probs[t * c + y as usize].max(f64::MIN_POSITIVE).ln() * weight;
        }
        run_backward(config, params, ex, &cache, weight, &mut grad);
    }
    loss += objective.penalty_and_grad(params, &mut grad)?;
    Ok((loss, grad))
}

/// Cross-entropy loss only, no gradient.
pub fn loss(config: &ModelConfig, params: &ParameterSet, batch: &[Example], objective: &TrainingObjective) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::Input("empty batch".into()));
    }
    let total_tokens: usize = batch.iter().map(|e| e.tokens.len()).sum();
    let mut loss = 0.0;
    for ex in batch {
        check_example(config, ex)?;
        let cache = run_forward(config, params, &ex.tokens, true);
        let c = config.num_labels;
        for (t, &y) in ex.labels.iter().enumerate() {
            loss -= cache.probs[t * c + y as usize].max(f64::MIN_POSITIVE).ln();
        }
    }
    Ok(loss / total_tokens as f64 + objective.penalty(params)?)
}
