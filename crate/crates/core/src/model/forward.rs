//! Forward pass: embedding, cascade cross-attention over the context,
//! causal self-attention over the query slots, and the vocabulary
//! projection. Every intermediate needed by the backward pass is cached.
//!
//! Query states are initialized from the final n embedded context positions.
//! Cross layer 1 attends query→context under the final-block causal mask
//! combined with the padding mask; each later cross layer takes the previous
//! layer's output as its query stream and re-derives keys/values from the
//! embedded context, adding its scale mask when configured. Attention
//! iterates visible cells only, so hidden positions receive exactly zero
//! weight and cannot leak through arithmetic.

use crate::mask::{final_block_causal, padding_mask, scale_mask, vanilla_causal, AttentionMask};
use crate::segment::SegmentSample;

use super::params::{ModelConfig, Parameters};
use super::ModelError;

pub(crate) const LN_EPS: f64 = 1e-5;

// w is (inner × cols) row-major; returns x·w for x (rows × inner)
pub(crate) fn matmul(x: &[f64], w: &[f64], rows: usize, inner: usize, cols: usize) -> Vec<f64> {
    debug_assert_eq!(x.len(), rows * inner);
    debug_assert_eq!(w.len(), inner * cols);
    let mut out = vec![0.0; rows * cols];
    for r in 0..rows {
        let xrow = &x[r * inner..(r + 1) * inner];
        let orow = &mut out[r * cols..(r + 1) * cols];
        for (p, &xv) in xrow.iter().enumerate() {
            if xv == 0.0 {
                continue;
            }
            let wrow = &w[p * cols..(p + 1) * cols];
            for (o, &wv) in orow.iter_mut().zip(wrow) {
                *o += xv * wv;
            }
        }
    }
    out
}

pub(crate) fn gelu(x: f64) -> f64 {
    const C: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)
    const A: f64 = 0.044715;
    0.5 * x * (1.0 + (C * (x + A * x * x * x)).tanh())
}

pub(crate) fn gelu_prime(x: f64) -> f64 {
    const C: f64 = 0.797_884_560_802_865_4;
    const A: f64 = 0.044715;
    let u = C * (x + A * x * x * x);
    let t = u.tanh();
    0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * C * (1.0 + 3.0 * A * x * x)
}

/// Row-wise layer norm over feature dimension d. Returns the normalized
/// pre-affine values and 1/σ per row for the backward pass.
pub(crate) struct LnCache {
    pub xhat: Vec<f64>,
    pub inv_sigma: Vec<f64>,
}

pub(crate) fn layer_norm(x: &[f64], gain: &[f64], bias: &[f64], rows: usize, d: usize) -> (Vec<f64>, LnCache) {
    let mut y = vec![0.0; rows * d];
    let mut xhat = vec![0.0; rows * d];
    let mut inv_sigma = vec![0.0; rows];
    for r in 0..rows {
        let row = &x[r * d..(r + 1) * d];
        let mean = row.iter().sum::<f64>() / d as f64;
        let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / d as f64;
        let inv = 1.0 / (var + LN_EPS).sqrt();
        inv_sigma[r] = inv;
        for c in 0..d {
            let xh = (row[c] - mean) * inv;
            xhat[r * d + c] = xh;
            y[r * d + c] = xh * gain[c] + bias[c];
        }
    }
    (y, LnCache { xhat, inv_sigma })
}

/// Per-row masked softmax attention state for one block.
pub(crate) struct BlockCache {
    /// Layer-norm cache for the query stream.
    pub ln_q: LnCache,
    /// Normalized query stream, n×d.
    pub norm_q: Vec<f64>,
    pub q: Vec<f64>,
    pub k: Vec<f64>,
    pub v: Vec<f64>,
    /// Raw per-head dot products q·k (visible cells only), H × n × cols.
    pub dots: Vec<f64>,
    /// Softmax weights, H × n × cols; exactly zero on hidden cells.
    pub probs: Vec<f64>,
    /// Merged head outputs, n×d.
    pub merged: Vec<f64>,
    /// Dropout keep/scale mask for the attention branch, n×d.
    pub attn_drop: Option<Vec<f64>>,
    pub ln_f: LnCache,
    /// Normalized ffn input, n×d.
    pub ffn_in: Vec<f64>,
    /// Pre-activation, n×F.
    pub ffn_pre: Vec<f64>,
    /// Activation output, n×F.
    pub ffn_act: Vec<f64>,
    /// Dropout mask for the ffn branch, n×d.
    pub ffn_drop: Option<Vec<f64>>,
    /// Block output, n×d.
    pub h_out: Vec<f64>,
    pub mask: AttentionMask,
}

pub struct ForwardCache {
    /// Per cross layer: context layer-norm output (m×d) and its cache.
    pub(crate) ctx_norms: Vec<(Vec<f64>, LnCache)>,
    pub(crate) cross: Vec<BlockCache>,
    pub(crate) selfs: Vec<BlockCache>,
    pub(crate) ln_final: LnCache,
    /// Final norm output, n×d.
    pub(crate) fin: Vec<f64>,
    pub logits: Vec<f64>,
}

impl ForwardCache {
    /// Output of cross block `idx` (after its feed-forward), n×d.
    pub fn cross_layer_output(&self, idx: usize) -> &[f64] {
        &self.cross[idx].h_out
    }

    /// Attention weights of cross block `idx`, laid out H × n × m.
    pub fn cross_attention_probs(&self, idx: usize) -> &[f64] {
        &self.cross[idx].probs
    }
}

/// Multi-head masked attention. `kv` has `cols` rows of width d; queries have
/// n rows. `head_scale[h]` multiplies the pre-softmax logits of head h.
#[allow(clippy::too_many_arguments)]
fn masked_attention(
    norm_q: &[f64],
    kv_src: &[f64],
    wq: &[f64],
    wk: &[f64],
    wv: &[f64],
    head_scale: &[f64],
    mask: &AttentionMask,
    n: usize,
    cols: usize,
    d: usize,
    n_heads: usize,
) -> (Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>) {
    let dh = d / n_heads;
    let q = matmul(norm_q, wq, n, d, d);
    let k = matmul(kv_src, wk, cols, d, d);
    let v = matmul(kv_src, wv, cols, d, d);
    let scale = 1.0 / (dh as f64).sqrt();
    let mut dots = vec![0.0; n_heads * n * cols];
    let mut probs = vec![0.0; n_heads * n * cols];
    let mut merged = vec![0.0; n * d];
    for h in 0..n_heads {
        let off = h * dh;
        let plane = h * n * cols;
        for i in 0..n {
            let qrow = &q[i * d + off..i * d + off + dh];
            // visible cells only; hidden cells never touched
            let mut max_logit = f64::NEG_INFINITY;
            for j in 0..cols {
                if !mask.is_visible(i, j) {
                    continue;
                }
                let krow = &k[j * d + off..j * d + off + dh];
                let dot: f64 = qrow.iter().zip(krow).map(|(a, b)| a * b).sum();
                dots[plane + i * cols + j] = dot;
                let logit = dot * scale * head_scale[h];
                if logit > max_logit {
                    max_logit = logit;
                }
            }
            let mut denom = 0.0;
            for j in 0..cols {
                if !mask.is_visible(i, j) {
                    continue;
                }
                let logit = dots[plane + i * cols + j] * scale * head_scale[h];
                let e = (logit - max_logit).exp();
                probs[plane + i * cols + j] = e;
                denom += e;
            }
            let out = &mut merged[i * d + off..i * d + off + dh];
            for j in 0..cols {
                if !mask.is_visible(i, j) {
                    continue;
                }
                let p = probs[plane + i * cols + j] / denom;
                probs[plane + i * cols + j] = p;
                let vrow = &v[j * d + off..j * d + off + dh];
                for (o, &vv) in out.iter_mut().zip(vrow) {
                    *o += p * vv;
                }
            }
        }
    }
    (q, k, v, dots, probs, merged)
}

fn dropout_mask<R: rand::Rng>(rng: &mut R, len: usize, rate: f64) -> Vec<f64> {
    let keep = 1.0 - rate;
    (0..len)
        .map(|_| if rng.gen::<f64>() < keep { 1.0 / keep } else { 0.0 })
        .collect()
}

fn check_finite(h: &[f64], layer: &str) -> Result<(), ModelError> {
    if h.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(ModelError::NonFinite { layer: layer.to_string() })
    }
}

/// One attention block (attention + feed-forward, pre-norm residuals).
#[allow(clippy::too_many_arguments)]
fn run_block<R: rand::Rng>(
    h: Vec<f64>,
    norm_q: Vec<f64>,
    ln_q: LnCache,
    kv_src: &[f64],
    attn: &super::params::AttentionWeights,
    ffn_norm: &super::params::LayerNormParams,
    ffn: &super::params::FfnWeights,
    head_scale: &[f64],
    mask: AttentionMask,
    cfg: &ModelConfig,
    cols: usize,
    dropout: Option<&mut R>,
) -> BlockCache {
    let d = cfg.d_model;
    let n = cfg.n;
    let f = cfg.ffn_dim();
    let (q, k, v, dots, probs, merged) = masked_attention(
        &norm_q, kv_src, &attn.wq, &attn.wk, &attn.wv, head_scale, &mask, n, cols, d, cfg.n_heads,
    );
    let mut attn_out = matmul(&merged, &attn.wo, n, d, d);
    let mut rng_slot = dropout;
    let attn_drop = if cfg.dropout > 0.0 {
        rng_slot.as_deref_mut().map(|rng| {
            let mask = dropout_mask(rng, n * d, cfg.dropout);
            for (o, &m) in attn_out.iter_mut().zip(&mask) {
                *o *= m;
            }
            mask
        })
    } else {
        None
    };
    let h_mid: Vec<f64> = h.iter().zip(&attn_out).map(|(a, b)| a + b).collect();
    let (ffn_in, ln_f) = layer_norm(&h_mid, &ffn_norm.gain, &ffn_norm.bias, n, d);
    let ffn_pre = matmul(&ffn_in, &ffn.w1, n, d, f);
    let ffn_act: Vec<f64> = ffn_pre.iter().map(|&x| gelu(x)).collect();
    let mut ffn_out = matmul(&ffn_act, &ffn.w2, n, f, d);
    let ffn_drop = if cfg.dropout > 0.0 {
        rng_slot.map(|rng| {
            let mask = dropout_mask(rng, n * d, cfg.dropout);
            for (o, &m) in ffn_out.iter_mut().zip(&mask) {
                *o *= m;
            }
            mask
        })
    } else {
        None
    };
    let h_out: Vec<f64> = h_mid.iter().zip(&ffn_out).map(|(a, b)| a + b).collect();
    BlockCache {
        ln_q,
        norm_q,
        q,
        k,
        v,
        dots,
        probs,
        merged,
        attn_drop,
        ln_f,
        ffn_in,
        ffn_pre,
        ffn_act,
        ffn_drop,
        h_out,
        mask,
    }
}

/// Mask for cross layer `idx`. The padding mask is clamped to hide at most
/// m − n columns: a fully padded prefix would otherwise blind the leading
/// query rows, so the nearest PAD slots stay visible and serve as the
/// start-of-sequence anchor (their targets are ignored by the loss).
fn cross_mask(cfg: &ModelConfig, idx: usize, pad_count: usize) -> Result<AttentionMask, ModelError> {
    let mut mask = final_block_causal(cfg.n, cfg.m)?;
    let effective_pad = pad_count.min(cfg.m - cfg.n);
    if effective_pad > 0 {
        mask = mask.combine(&padding_mask(effective_pad, cfg.n, cfg.m)?)?;
    }
    if let Some(w) = cfg.cross_windows[idx] {
        mask = mask.combine(&scale_mask(cfg.n, cfg.m, w)?)?;
    }
    Ok(mask)
}

/// Full forward pass over raw input slots. `dropout_rng` enables the
/// configured dropout (training); inference passes `None`.
pub fn forward_inputs<R: rand::Rng>(
    params: &Parameters,
    cfg: &ModelConfig,
    inputs: &[u16],
    pad_count: usize,
    mut dropout_rng: Option<&mut R>,
) -> Result<ForwardCache, ModelError> {
    cfg.validate()?;
    if inputs.len() != cfg.m {
        return Err(ModelError::BadInput(format!(
            "expected {} input slots, got {}",
            cfg.m,
            inputs.len()
        )));
    }
    if let Some(&bad) = inputs.iter().find(|&&t| t as usize >= cfg.vocab_size) {
        return Err(ModelError::BadInput(format!("token {bad} outside vocabulary")));
    }
    let d = cfg.d_model;
    let n = cfg.n;
    let m = cfg.m;

    let mut emb = vec![0.0; m * d];
    for (i, &tok) in inputs.iter().enumerate() {
        let trow = &params.token_embedding[tok as usize * d..(tok as usize + 1) * d];
        let prow = &params.position_embedding[i * d..(i + 1) * d];
        for c in 0..d {
            emb[i * d + c] = trow[c] + prow[c];
        }
    }

    // query stream starts from the final n embedded positions
    let mut h = emb[(m - n) * d..].to_vec();

    let mut ctx_norms = Vec::with_capacity(cfg.cross_windows.len());
    let mut cross = Vec::with_capacity(cfg.cross_windows.len());
    for (idx, layer) in params.cross_layers.iter().enumerate() {
        let mask = cross_mask(cfg, idx, pad_count)?;
        let (kn, ln_ctx) = layer_norm(&emb, &layer.context_norm.gain, &layer.context_norm.bias, m, d);
        let (norm_q, ln_q) = layer_norm(&h, &layer.query_norm.gain, &layer.query_norm.bias, n, d);
        let block = run_block(
            h,
            norm_q,
            ln_q,
            &kn,
            &layer.attn,
            &layer.ffn_norm,
            &layer.ffn,
            &params.head_scale,
            mask,
            cfg,
            m,
            dropout_rng.as_deref_mut(),
        );
        h = block.h_out.clone();
        check_finite(&h, &format!("cross {}", idx + 1))?;
        ctx_norms.push((kn, ln_ctx));
        cross.push(block);
    }

    let causal = vanilla_causal(n)?;
    let mut selfs = Vec::with_capacity(cfg.n_self_layers);
    for (idx, layer) in params.self_layers.iter().enumerate() {
        let (norm_q, ln_q) = layer_norm(&h, &layer.norm.gain, &layer.norm.bias, n, d);
        let kv = norm_q.clone();
        let block = run_block(
            h,
            norm_q,
            ln_q,
            &kv,
            &layer.attn,
            &layer.ffn_norm,
            &layer.ffn,
            &params.head_scale,
            causal.clone(),
            cfg,
            n,
            dropout_rng.as_deref_mut(),
        );
        h = block.h_out.clone();
        check_finite(&h, &format!("self {}", idx + 1))?;
        selfs.push(block);
    }

    let (fin, ln_final) = layer_norm(&h, &params.final_norm.gain, &params.final_norm.bias, n, d);
    let logits = matmul(&fin, &params.output_projection, n, d, cfg.vocab_size);
    check_finite(&logits, "output projection")?;

    Ok(ForwardCache { ctx_norms, cross, selfs, ln_final, fin, logits })
}

/// Forward pass for a training sample; returns logits of shape n × vocab.
pub fn forward(
    params: &Parameters,
    cfg: &ModelConfig,
    sample: &SegmentSample,
) -> Result<ForwardCache, ModelError> {
    forward_inputs::<rand_chacha::ChaCha8Rng>(params, cfg, &sample.inputs, sample.pad_count, None)
}

/// Mean cross-entropy over non-ignored targets.
pub fn loss(logits: &[f64], targets: &[u16], ignore: &[bool], vocab: usize) -> Result<f64, ModelError> {
    debug_assert_eq!(logits.len(), targets.len() * vocab);
    let mut total = 0.0;
    let mut count = 0usize;
    for (i, (&t, &ig)) in targets.iter().zip(ignore).enumerate() {
        if ig {
            continue;
        }
        let row = &logits[i * vocab..(i + 1) * vocab];
        total += cross_entropy_row(row, t as usize);
        count += 1;
    }
    if count == 0 {
        return Err(ModelError::AllTargetsIgnored);
    }
    Ok(total / count as f64)
}

pub(crate) fn cross_entropy_row(row: &[f64], target: usize) -> f64 {
    let max = row.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    let lse = row.iter().map(|&v| (v - max).exp()).sum::<f64>().ln() + max;
    lse - row[target]
}
