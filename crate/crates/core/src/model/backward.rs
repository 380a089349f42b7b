//! Hand-derived gradients for the full network. The layout mirrors the
//! forward pass exactly; every branch reads the caches the forward pass
//! stored. Backward iterates the same visible mask cells as forward, so
//! hidden attention positions contribute nothing in either direction.

use crate::segment::SegmentSample;

use super::forward::{forward, gelu_prime, BlockCache, ForwardCache, LnCache};
use super::params::{ModelConfig, Parameters};
use super::ModelError;

// dw (inner×cols) += x^T (rows×inner)^T · dy (rows×cols)
fn accum_xt_dy(x: &[f64], dy: &[f64], dw: &mut [f64], rows: usize, inner: usize, cols: usize) {
    debug_assert_eq!(x.len(), rows * inner);
    debug_assert_eq!(dy.len(), rows * cols);
    debug_assert_eq!(dw.len(), inner * cols);
    for r in 0..rows {
        let xrow = &x[r * inner..(r + 1) * inner];
        let dyrow = &dy[r * cols..(r + 1) * cols];
        for (p, &xv) in xrow.iter().enumerate() {
            if xv == 0.0 {
                continue;
            }
            let wrow = &mut dw[p * cols..(p + 1) * cols];
            for (w, &g) in wrow.iter_mut().zip(dyrow) {
                *w += xv * g;
            }
        }
    }
}

// dx (rows×inner) = dy (rows×cols) · w^T, with w (inner×cols)
fn matmul_wt(dy: &[f64], w: &[f64], rows: usize, inner: usize, cols: usize) -> Vec<f64> {
    debug_assert_eq!(dy.len(), rows * cols);
    debug_assert_eq!(w.len(), inner * cols);
    let mut dx = vec![0.0; rows * inner];
    for r in 0..rows {
        let dyrow = &dy[r * cols..(r + 1) * cols];
        let dxrow = &mut dx[r * inner..(r + 1) * inner];
        for (p, out) in dxrow.iter_mut().enumerate() {
            let wrow = &w[p * cols..(p + 1) * cols];
            *out = dyrow.iter().zip(wrow).map(|(a, b)| a * b).sum();
        }
    }
    dx
}

/// Layer-norm backward. `dy` is the gradient at the affine output; returns
/// the gradient at the raw input and accumulates gain/bias gradients.
fn ln_backward(
    dy: &[f64],
    gain: &[f64],
    cache: &LnCache,
    rows: usize,
    d: usize,
    dgain: &mut [f64],
    dbias: &mut [f64],
) -> Vec<f64> {
    let mut dx = vec![0.0; rows * d];
    for r in 0..rows {
        let dyr = &dy[r * d..(r + 1) * d];
        let xh = &cache.xhat[r * d..(r + 1) * d];
        let inv = cache.inv_sigma[r];
        let mut s1 = 0.0;
        let mut s2 = 0.0;
        for c in 0..d {
            let g = dyr[c] * gain[c];
            s1 += g;
            s2 += g * xh[c];
            dgain[c] += dyr[c] * xh[c];
            dbias[c] += dyr[c];
        }
        s1 /= d as f64;
        s2 /= d as f64;
        for c in 0..d {
            let g = dyr[c] * gain[c];
            dx[r * d + c] = inv * (g - s1 - xh[c] * s2);
        }
    }
    dx
}

struct AttnGradOut {
    /// Gradient at the normalized query stream.
    d_norm_q: Vec<f64>,
    /// Gradient at the key/value source rows.
    d_kv_src: Vec<f64>,
}

/// Gradient of the batch-normalized cross-entropy at the logits: rows with
/// ignored targets are zero; live rows are (softmax − onehot) / norm_count.
pub fn loss_grad(
    logits: &[f64],
    targets: &[u16],
    ignore: &[bool],
    vocab: usize,
    norm_count: usize,
) -> Vec<f64> {
    let mut d = vec![0.0; logits.len()];
    let inv = 1.0 / norm_count as f64;
    for (i, (&t, &ig)) in targets.iter().zip(ignore).enumerate() {
        if ig {
            continue;
        }
        let row = &logits[i * vocab..(i + 1) * vocab];
        let max = row.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        let denom: f64 = row.iter().map(|&v| (v - max).exp()).sum();
        let drow = &mut d[i * vocab..(i + 1) * vocab];
        for (dst, &v) in drow.iter_mut().zip(row) {
            *dst = (v - max).exp() / denom * inv;
        }
        drow[t as usize] -= inv;
    }
    d
}

/// Backward through the whole network, accumulating into `grads`.
pub fn backward(
    params: &Parameters,
    cfg: &ModelConfig,
    cache: &ForwardCache,
    inputs: &[u16],
    dlogits: &[f64],
    grads: &mut Parameters,
) {
    let d = cfg.d_model;
    let n = cfg.n;
    let m = cfg.m;
    let v = cfg.vocab_size;

    // vocabulary projection
    accum_xt_dy(&cache.fin, dlogits, &mut grads.output_projection, n, d, v);
    let dfin = matmul_wt(dlogits, &params.output_projection, n, d, v);
    let mut dh = ln_backward(
        &dfin,
        &params.final_norm.gain,
        &cache.ln_final,
        n,
        d,
        &mut grads.final_norm.gain,
        &mut grads.final_norm.bias,
    );

    // self blocks, reverse
    for (idx, block) in cache.selfs.iter().enumerate().rev() {
        let layer = &params.self_layers[idx];
        let g_layer = &mut grads.self_layers[idx];
        let (mut d_hmid, attn_grads) = block_backward(
            block,
            &block.norm_q, // self-attention: kv source is the normalized stream itself
            &layer.attn,
            &layer.ffn,
            &layer.ffn_norm.gain,
            &params.head_scale,
            &mut g_layer.attn,
            &mut g_layer.ffn,
            &mut g_layer.ffn_norm,
            &mut grads.head_scale,
            &dh,
            cfg,
            n,
        );
        // q, k and v all came through the same layer norm
        let mut d_norm = attn_grads.d_norm_q;
        for (a, b) in d_norm.iter_mut().zip(&attn_grads.d_kv_src) {
            *a += b;
        }
        let d_ln_in = ln_backward(
            &d_norm,
            &layer.norm.gain,
            &block.ln_q,
            n,
            d,
            &mut g_layer.norm.gain,
            &mut g_layer.norm.bias,
        );
        for (a, b) in d_hmid.iter_mut().zip(&d_ln_in) {
            *a += b;
        }
        dh = d_hmid;
    }

    // cross blocks, reverse; the context gradient accumulates across layers
    let mut demb = vec![0.0; m * d];
    for (idx, block) in cache.cross.iter().enumerate().rev() {
        let layer = &params.cross_layers[idx];
        let g_layer = &mut grads.cross_layers[idx];
        let (kn, ln_ctx) = &cache.ctx_norms[idx];
        let (mut d_hmid, attn_grads) = block_backward(
            block,
            kn,
            &layer.attn,
            &layer.ffn,
            &layer.ffn_norm.gain,
            &params.head_scale,
            &mut g_layer.attn,
            &mut g_layer.ffn,
            &mut g_layer.ffn_norm,
            &mut grads.head_scale,
            &dh,
            cfg,
            m,
        );
        let d_ln_in = ln_backward(
            &attn_grads.d_norm_q,
            &layer.query_norm.gain,
            &block.ln_q,
            n,
            d,
            &mut g_layer.query_norm.gain,
            &mut g_layer.query_norm.bias,
        );
        for (a, b) in d_hmid.iter_mut().zip(&d_ln_in) {
            *a += b;
        }
        let d_ctx = ln_backward(
            &attn_grads.d_kv_src,
            &layer.context_norm.gain,
            ln_ctx,
            m,
            d,
            &mut g_layer.context_norm.gain,
            &mut g_layer.context_norm.bias,
        );
        for (a, b) in demb.iter_mut().zip(&d_ctx) {
            *a += b;
        }
        dh = d_hmid;
    }

    // query stream initialization reads the final n embedded positions
    for (i, chunk) in dh.chunks_exact(d).enumerate() {
        let slot = m - n + i;
        for (a, b) in demb[slot * d..(slot + 1) * d].iter_mut().zip(chunk) {
            *a += b;
        }
    }

    // embeddings
    for (i, &tok) in inputs.iter().enumerate() {
        let src = &demb[i * d..(i + 1) * d];
        let trow = &mut grads.token_embedding[tok as usize * d..(tok as usize + 1) * d];
        for (a, b) in trow.iter_mut().zip(src) {
            *a += b;
        }
        let prow = &mut grads.position_embedding[i * d..(i + 1) * d];
        for (a, b) in prow.iter_mut().zip(src) {
            *a += b;
        }
    }
}

/// Backward through one block (feed-forward then attention), returning the
/// gradient at the block input plus the q / kv-source gradients for the
/// caller to route through the right layer norms.
#[allow(clippy::too_many_arguments)]
fn block_backward(
    block: &BlockCache,
    kv_src: &[f64],
    attn: &super::params::AttentionWeights,
    ffn: &super::params::FfnWeights,
    ffn_gain: &[f64],
    head_scale: &[f64],
    g_attn: &mut super::params::AttentionWeights,
    g_ffn: &mut super::params::FfnWeights,
    g_ffn_norm: &mut super::params::LayerNormParams,
    g_head_scale: &mut [f64],
    d_hout: &[f64],
    cfg: &ModelConfig,
    cols: usize,
) -> (Vec<f64>, AttnGradOut) {
    let d = cfg.d_model;
    let n = cfg.n;
    let f = cfg.ffn_dim();
    let n_heads = cfg.n_heads;
    let dh = d / n_heads;
    let scale = 1.0 / (dh as f64).sqrt();

    let mut d_ffn_out = d_hout.to_vec();
    if let Some(mask) = &block.ffn_drop {
        for (g, &mk) in d_ffn_out.iter_mut().zip(mask) {
            *g *= mk;
        }
    }
    accum_xt_dy(&block.ffn_act, &d_ffn_out, &mut g_ffn.w2, n, f, d);
    let d_act = matmul_wt(&d_ffn_out, &ffn.w2, n, f, d);
    let d_pre: Vec<f64> = d_act
        .iter()
        .zip(&block.ffn_pre)
        .map(|(&g, &x)| g * gelu_prime(x))
        .collect();
    accum_xt_dy(&block.ffn_in, &d_pre, &mut g_ffn.w1, n, d, f);
    let d_ffn_in = matmul_wt(&d_pre, &ffn.w1, n, d, f);
    let mut d_hmid = ln_backward(
        &d_ffn_in,
        ffn_gain,
        &block.ln_f,
        n,
        d,
        &mut g_ffn_norm.gain,
        &mut g_ffn_norm.bias,
    );
    for (g, &up) in d_hmid.iter_mut().zip(d_hout) {
        *g += up;
    }

    let mut d_attn_out = d_hmid.clone();
    if let Some(mask) = &block.attn_drop {
        for (g, &mk) in d_attn_out.iter_mut().zip(mask) {
            *g *= mk;
        }
    }
    accum_xt_dy(&block.merged, &d_attn_out, &mut g_attn.wo, n, d, d);
    let d_merged = matmul_wt(&d_attn_out, &attn.wo, n, d, d);

    let mut dq = vec![0.0; n * d];
    let mut dk = vec![0.0; cols * d];
    let mut dv = vec![0.0; cols * d];
    for h in 0..n_heads {
        let off = h * dh;
        let plane = h * n * cols;
        for i in 0..n {
            let dm = &d_merged[i * d + off..i * d + off + dh];
            let mut dp = vec![0.0; cols];
            let mut sum_pd = 0.0;
            for j in 0..cols {
                if !block.mask.is_visible(i, j) {
                    continue;
                }
                let p = block.probs[plane + i * cols + j];
                let vrow = &block.v[j * d + off..j * d + off + dh];
                let g: f64 = dm.iter().zip(vrow).map(|(a, b)| a * b).sum();
                dp[j] = g;
                sum_pd += p * g;
                for (dvv, &mv) in dv[j * d + off..j * d + off + dh].iter_mut().zip(dm) {
                    *dvv += p * mv;
                }
            }
            for j in 0..cols {
                if !block.mask.is_visible(i, j) {
                    continue;
                }
                let p = block.probs[plane + i * cols + j];
                let d_logit = p * (dp[j] - sum_pd);
                let dot = block.dots[plane + i * cols + j];
                g_head_scale[h] += d_logit * dot * scale;
                let d_dot = d_logit * scale * head_scale[h];
                let krow = &block.k[j * d + off..j * d + off + dh];
                let qrow = &block.q[i * d + off..i * d + off + dh];
                for c in 0..dh {
                    dq[i * d + off + c] += d_dot * krow[c];
                    dk[j * d + off + c] += d_dot * qrow[c];
                }
            }
        }
    }

    accum_xt_dy(&block.norm_q, &dq, &mut g_attn.wq, n, d, d);
    accum_xt_dy(kv_src, &dk, &mut g_attn.wk, cols, d, d);
    accum_xt_dy(kv_src, &dv, &mut g_attn.wv, cols, d, d);
    let d_norm_q = matmul_wt(&dq, &attn.wq, n, d, d);
    let mut d_kv_src = matmul_wt(&dk, &attn.wk, cols, d, d);
    let dv_src = matmul_wt(&dv, &attn.wv, cols, d, d);
    for (a, b) in d_kv_src.iter_mut().zip(&dv_src) {
        *a += b;
    }

    (d_hmid, AttnGradOut { d_norm_q, d_kv_src })
}

/// Loss and parameter gradients for a batch. The loss is the mean
/// cross-entropy over every non-ignored target in the batch.
pub fn compute_gradients(
    params: &Parameters,
    cfg: &ModelConfig,
    batch: &[SegmentSample],
) -> Result<(f64, Parameters), ModelError> {
    if batch.is_empty() {
        return Err(ModelError::BadInput("empty batch".into()));
    }
    let total: usize = batch.iter().map(|s| s.supervised_count()).sum();
    if total == 0 {
        return Err(ModelError::AllTargetsIgnored);
    }
    let mut grads = Parameters::zeros(cfg);
    let mut ce_sum = 0.0;
    for sample in batch {
        let cache = forward(params, cfg, sample)?;
        for (i, (&t, &ig)) in sample.targets.iter().zip(&sample.ignore).enumerate() {
            if !ig {
                let row = &cache.logits[i * cfg.vocab_size..(i + 1) * cfg.vocab_size];
                ce_sum += super::forward::cross_entropy_row(row, t as usize);
            }
        }
        let dlogits = loss_grad(&cache.logits, &sample.targets, &sample.ignore, cfg.vocab_size, total);
        backward(params, cfg, &cache, &sample.inputs, &dlogits, &mut grads);
    }
    Ok((ce_sum / total as f64, grads))
}
