//! Model configuration, parameter storage, and checkpointing.
//!
//! All weights are f64 in flat row-major buffers. The parameter count is a
//! closed-form function of the configuration; see [`count_params`].

use std::io::{Read, Write};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;

use super::ModelError;

/// Feed-forward hidden width as a multiple of d_model.
pub const FFN_MULT: usize = 4;

const CHECKPOINT_MAGIC: &[u8; 4] = b"CZCK";
const CHECKPOINT_VERSION: u32 = 1;

/// Architecture hyperparameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub vocab_size: usize,
    pub d_model: usize,
    pub n_heads: usize,
    pub d_head: usize,
    pub n_self_layers: usize,
    /// One entry per cross-attention layer: `None` attends to the full
    /// context, `Some(w)` only to the last w context positions.
    pub cross_windows: Vec<Option<usize>>,
    /// Context length.
    pub m: usize,
    /// Query length.
    pub n: usize,
    pub dropout: f64,
    pub seed: u64,
}

impl ModelConfig {
    /// Small configuration used throughout the test suites.
    pub fn toy() -> Self {
        Self {
            vocab_size: 390,
            d_model: 32,
            n_heads: 4,
            d_head: 8,
            n_self_layers: 2,
            cross_windows: vec![None, Some(8)],
            m: 16,
            n: 4,
            dropout: 0.0,
            seed: 0,
        }
    }

    /// The full-scale reference configuration: hidden 1024, 16 heads of 64,
    /// 24 self-attention layers, cross layers [full, window 1024], context
    /// 32768, query 1024.
    pub fn full_scale() -> Self {
        Self {
            vocab_size: 390,
            d_model: 1024,
            n_heads: 16,
            d_head: 64,
            n_self_layers: 24,
            cross_windows: vec![None, Some(1024)],
            m: 32768,
            n: 1024,
            dropout: 0.0,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.vocab_size == 0 {
            return Err(ModelError::BadConfig("vocab_size must be positive".into()));
        }
        if self.d_model == 0 || self.n_heads == 0 || self.d_head == 0 {
            return Err(ModelError::BadConfig("zero model dimension".into()));
        }
        if self.d_model != self.n_heads * self.d_head {
            return Err(ModelError::BadConfig(format!(
                "d_model ({}) must equal n_heads ({}) * d_head ({})",
                self.d_model, self.n_heads, self.d_head
            )));
        }
        if self.cross_windows.is_empty() {
            return Err(ModelError::BadConfig("need at least one cross-attention layer".into()));
        }
        if self.n == 0 || self.n > self.m {
            return Err(ModelError::BadConfig(format!("need 1 <= n <= m, got n={} m={}", self.n, self.m)));
        }
        for (idx, w) in self.cross_windows.iter().enumerate() {
            if let Some(w) = w {
                // a window narrower than the query would blind its first rows
                if *w < self.n || *w > self.m {
                    return Err(ModelError::BadConfig(format!(
                        "cross layer {} window {} outside [n={}, m={}]",
                        idx + 1,
                        w,
                        self.n,
                        self.m
                    )));
                }
            }
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(ModelError::BadConfig(format!("dropout {} outside [0, 1)", self.dropout)));
        }
        Ok(())
    }

    pub fn ffn_dim(&self) -> usize {
        FFN_MULT * self.d_model
    }
}

/// Total learnable parameter count; pure shape arithmetic, no allocation.
///
/// Per attention block: 4 d² projection weights plus 8 d² feed-forward
/// weights (all bias-free) and affine layer norms (2d each) — two norms per
/// self block, three per cross block (the context stream is normalized
/// separately). Globally: token and position embeddings, one per-head
/// attention temperature shared by every layer, a final norm, and the
/// bias-free vocabulary projection.
pub fn count_params(cfg: &ModelConfig) -> Result<u64, ModelError> {
    cfg.validate()?;
    let d = cfg.d_model as u64;
    let v = cfg.vocab_size as u64;
    let m = cfg.m as u64;
    let per_block = (4 + 2 * FFN_MULT as u64) * d * d;
    let cross = cfg.cross_windows.len() as u64 * (6 * d + per_block);
    let selfs = cfg.n_self_layers as u64 * (4 * d + per_block);
    Ok(v * d + m * d + cfg.n_heads as u64 + cross + selfs + 2 * d + d * v)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerNormParams {
    pub gain: Vec<f64>,
    pub bias: Vec<f64>,
}

impl LayerNormParams {
    fn identity(d: usize) -> Self {
        Self { gain: vec![1.0; d], bias: vec![0.0; d] }
    }

    fn zeros(d: usize) -> Self {
        Self { gain: vec![0.0; d], bias: vec![0.0; d] }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttentionWeights {
    /// d×d, row-major; projects a row vector x to x·W.
    pub wq: Vec<f64>,
    pub wk: Vec<f64>,
    pub wv: Vec<f64>,
    pub wo: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FfnWeights {
    /// d × 4d.
    pub w1: Vec<f64>,
    /// 4d × d.
    pub w2: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrossLayerParams {
    pub query_norm: LayerNormParams,
    pub context_norm: LayerNormParams,
    pub attn: AttentionWeights,
    pub ffn_norm: LayerNormParams,
    pub ffn: FfnWeights,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelfLayerParams {
    pub norm: LayerNormParams,
    pub attn: AttentionWeights,
    pub ffn_norm: LayerNormParams,
    pub ffn: FfnWeights,
}

/// All learnable weights.
#[derive(Debug, Clone, PartialEq)]
pub struct Parameters {
    /// vocab_size × d.
    pub token_embedding: Vec<f64>,
    /// m × d; position i belongs to context slot i (left padding therefore
    /// occupies the lowest positions).
    pub position_embedding: Vec<f64>,
    /// Learned per-head attention temperature, shared across layers.
    pub head_scale: Vec<f64>,
    pub cross_layers: Vec<CrossLayerParams>,
    pub self_layers: Vec<SelfLayerParams>,
    pub final_norm: LayerNormParams,
    /// d × vocab_size.
    pub output_projection: Vec<f64>,
}

fn fill_uniform<R: Rng>(rng: &mut R, len: usize, radius: f64) -> Vec<f64> {
    (0..len).map(|_| rng.gen_range(-radius..radius)).collect()
}

impl Parameters {
    /// Seeded initialization. Projections are uniform at 1/√d scale; the
    /// vocabulary projection starts at zero so the first-step loss of an
    /// untrained model is exactly ln(vocab_size).
    pub fn init(cfg: &ModelConfig) -> Result<Self, ModelError> {
        cfg.validate()?;
        let d = cfg.d_model;
        let f = cfg.ffn_dim();
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let proj_r = 1.0 / (d as f64).sqrt();
        let ffn_r = 1.0 / (f as f64).sqrt();
        let attn = |rng: &mut ChaCha8Rng| AttentionWeights {
            wq: fill_uniform(rng, d * d, proj_r),
            wk: fill_uniform(rng, d * d, proj_r),
            wv: fill_uniform(rng, d * d, proj_r),
            wo: fill_uniform(rng, d * d, proj_r),
        };
        let cross_layers = (0..cfg.cross_windows.len())
            .map(|_| CrossLayerParams {
                query_norm: LayerNormParams::identity(d),
                context_norm: LayerNormParams::identity(d),
                attn: attn(&mut rng),
                ffn_norm: LayerNormParams::identity(d),
                ffn: FfnWeights {
                    w1: fill_uniform(&mut rng, d * f, proj_r),
                    w2: fill_uniform(&mut rng, f * d, ffn_r),
                },
            })
            .collect();
        let self_layers = (0..cfg.n_self_layers)
            .map(|_| SelfLayerParams {
                norm: LayerNormParams::identity(d),
                attn: attn(&mut rng),
                ffn_norm: LayerNormParams::identity(d),
                ffn: FfnWeights {
                    w1: fill_uniform(&mut rng, d * f, proj_r),
                    w2: fill_uniform(&mut rng, f * d, ffn_r),
                },
            })
            .collect();
        Ok(Self {
            token_embedding: fill_uniform(&mut rng, cfg.vocab_size * d, 0.1),
            position_embedding: fill_uniform(&mut rng, cfg.m * d, 0.1),
            head_scale: vec![1.0; cfg.n_heads],
            cross_layers,
            self_layers,
            final_norm: LayerNormParams::identity(d),
            output_projection: vec![0.0; d * cfg.vocab_size],
        })
    }

    /// All-zero parameters with the same shapes; the gradient container.
    pub fn zeros(cfg: &ModelConfig) -> Self {
        let d = cfg.d_model;
        let f = cfg.ffn_dim();
        let attn = || AttentionWeights {
            wq: vec![0.0; d * d],
            wk: vec![0.0; d * d],
            wv: vec![0.0; d * d],
            wo: vec![0.0; d * d],
        };
        Self {
            token_embedding: vec![0.0; cfg.vocab_size * d],
            position_embedding: vec![0.0; cfg.m * d],
            head_scale: vec![0.0; cfg.n_heads],
            cross_layers: (0..cfg.cross_windows.len())
                .map(|_| CrossLayerParams {
                    query_norm: LayerNormParams::zeros(d),
                    context_norm: LayerNormParams::zeros(d),
                    attn: attn(),
                    ffn_norm: LayerNormParams::zeros(d),
                    ffn: FfnWeights { w1: vec![0.0; d * f], w2: vec![0.0; f * d] },
                })
                .collect(),
            self_layers: (0..cfg.n_self_layers)
                .map(|_| SelfLayerParams {
                    norm: LayerNormParams::zeros(d),
                    attn: attn(),
                    ffn_norm: LayerNormParams::zeros(d),
                    ffn: FfnWeights { w1: vec![0.0; d * f], w2: vec![0.0; f * d] },
                })
                .collect(),
            final_norm: LayerNormParams::zeros(d),
            output_projection: vec![0.0; d * cfg.vocab_size],
        }
    }

    /// Tensors in canonical order, with stable names for diagnostics.
    pub fn tensors(&self) -> Vec<(String, &[f64])> {
        let mut out: Vec<(String, &[f64])> = vec![
            ("token_embedding".into(), &self.token_embedding),
            ("position_embedding".into(), &self.position_embedding),
            ("head_scale".into(), &self.head_scale),
        ];
        for (i, layer) in self.cross_layers.iter().enumerate() {
            out.push((format!("cross{i}.query_norm.gain"), &layer.query_norm.gain));
            out.push((format!("cross{i}.query_norm.bias"), &layer.query_norm.bias));
            out.push((format!("cross{i}.context_norm.gain"), &layer.context_norm.gain));
            out.push((format!("cross{i}.context_norm.bias"), &layer.context_norm.bias));
            out.push((format!("cross{i}.wq"), &layer.attn.wq));
            out.push((format!("cross{i}.wk"), &layer.attn.wk));
            out.push((format!("cross{i}.wv"), &layer.attn.wv));
            out.push((format!("cross{i}.wo"), &layer.attn.wo));
            out.push((format!("cross{i}.ffn_norm.gain"), &layer.ffn_norm.gain));
            out.push((format!("cross{i}.ffn_norm.bias"), &layer.ffn_norm.bias));
            out.push((format!("cross{i}.w1"), &layer.ffn.w1));
            out.push((format!("cross{i}.w2"), &layer.ffn.w2));
        }
        for (i, layer) in self.self_layers.iter().enumerate() {
            out.push((format!("self{i}.norm.gain"), &layer.norm.gain));
            out.push((format!("self{i}.norm.bias"), &layer.norm.bias));
            out.push((format!("self{i}.wq"), &layer.attn.wq));
            out.push((format!("self{i}.wk"), &layer.attn.wk));
            out.push((format!("self{i}.wv"), &layer.attn.wv));
            out.push((format!("self{i}.wo"), &layer.attn.wo));
            out.push((format!("self{i}.ffn_norm.gain"), &layer.ffn_norm.gain));
            out.push((format!("self{i}.ffn_norm.bias"), &layer.ffn_norm.bias));
            out.push((format!("self{i}.w1"), &layer.ffn.w1));
            out.push((format!("self{i}.w2"), &layer.ffn.w2));
        }
        out.push(("final_norm.gain".into(), &self.final_norm.gain));
        out.push(("final_norm.bias".into(), &self.final_norm.bias));
        out.push(("output_projection".into(), &self.output_projection));
        out
    }

    /// Same order as [`Parameters::tensors`], mutable.
    pub fn tensors_mut(&mut self) -> Vec<&mut Vec<f64>> {
        let mut out: Vec<&mut Vec<f64>> = vec![
            &mut self.token_embedding,
            &mut self.position_embedding,
            &mut self.head_scale,
        ];
        for layer in &mut self.cross_layers {
            out.push(&mut layer.query_norm.gain);
            out.push(&mut layer.query_norm.bias);
            out.push(&mut layer.context_norm.gain);
            out.push(&mut layer.context_norm.bias);
            out.push(&mut layer.attn.wq);
            out.push(&mut layer.attn.wk);
            out.push(&mut layer.attn.wv);
            out.push(&mut layer.attn.wo);
            out.push(&mut layer.ffn_norm.gain);
            out.push(&mut layer.ffn_norm.bias);
            out.push(&mut layer.ffn.w1);
            out.push(&mut layer.ffn.w2);
        }
        for layer in &mut self.self_layers {
            out.push(&mut layer.norm.gain);
            out.push(&mut layer.norm.bias);
            out.push(&mut layer.attn.wq);
            out.push(&mut layer.attn.wk);
            out.push(&mut layer.attn.wv);
            out.push(&mut layer.attn.wo);
            out.push(&mut layer.ffn_norm.gain);
            out.push(&mut layer.ffn_norm.bias);
            out.push(&mut layer.ffn.w1);
            out.push(&mut layer.ffn.w2);
        }
        out.push(&mut self.final_norm.gain);
        out.push(&mut self.final_norm.bias);
        out.push(&mut self.output_projection);
        out
    }

    pub fn num_params(&self) -> u64 {
        self.tensors().iter().map(|(_, t)| t.len() as u64).sum()
    }

    pub fn all_finite(&self) -> bool {
        self.tensors().iter().all(|(_, t)| t.iter().all(|v| v.is_finite()))
    }
}

// crc32 (ieee), table-driven
fn crc32(data: &[u8]) -> u32 {
    let mut table = [0u32; 256];
    for (i, entry) in table.iter_mut().enumerate() {
        let mut c = i as u32;
        for _ in 0..8 {
            c = if c & 1 != 0 { 0xedb88320 ^ (c >> 1) } else { c >> 1 };
        }
        *entry = c;
    }
    let mut crc = 0xffffffffu32;
    for &b in data {
        crc = table[((crc ^ b as u32) & 0xff) as usize] ^ (crc >> 8);
    }
    crc ^ 0xffffffff
}

/// Serialize config + parameters: magic, version, config header, raw 64-bit
/// parameter blob, trailing CRC-32 of everything before it. Little-endian
/// throughout.
pub fn save_checkpoint<W: Write>(w: &mut W, cfg: &ModelConfig, params: &Parameters) -> Result<(), ModelError> {
    let mut buf: Vec<u8> = Vec::new();
    buf.extend_from_slice(CHECKPOINT_MAGIC);
    buf.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    buf.extend_from_slice(&(cfg.vocab_size as u32).to_le_bytes());
    buf.extend_from_slice(&(cfg.d_model as u32).to_le_bytes());
    buf.extend_from_slice(&(cfg.n_heads as u32).to_le_bytes());
    buf.extend_from_slice(&(cfg.d_head as u32).to_le_bytes());
    buf.extend_from_slice(&(cfg.n_self_layers as u32).to_le_bytes());
    buf.extend_from_slice(&(cfg.cross_windows.len() as u32).to_le_bytes());
    for w in &cfg.cross_windows {
        buf.extend_from_slice(&(w.map(|x| x as u64).unwrap_or(0)).to_le_bytes());
    }
    buf.extend_from_slice(&(cfg.m as u64).to_le_bytes());
    buf.extend_from_slice(&(cfg.n as u64).to_le_bytes());
    buf.extend_from_slice(&cfg.dropout.to_le_bytes());
    buf.extend_from_slice(&cfg.seed.to_le_bytes());
    buf.extend_from_slice(&params.num_params().to_le_bytes());
    for (_, tensor) in params.tensors() {
        for &v in tensor {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    let crc = crc32(&buf);
    buf.extend_from_slice(&crc.to_le_bytes());
    w.write_all(&buf)?;
    Ok(())
}

pub fn load_checkpoint<R: Read>(r: &mut R) -> Result<(ModelConfig, Parameters), ModelError> {
    let mut buf = Vec::new();
    r.read_to_end(&mut buf)?;
    if buf.len() < 12 {
        return Err(ModelError::BadCheckpoint("file too short".into()));
    }
    let (body, crc_bytes) = buf.split_at(buf.len() - 4);
    let stored = u32::from_le_bytes(crc_bytes.try_into().unwrap());
    if crc32(body) != stored {
        return Err(ModelError::BadCheckpoint("checksum mismatch".into()));
    }
    let mut pos = 0usize;
    let take = |pos: &mut usize, len: usize| -> Result<&[u8], ModelError> {
        if *pos + len > body.len() {
            return Err(ModelError::BadCheckpoint("truncated checkpoint".into()));
        }
        let s = &body[*pos..*pos + len];
        *pos += len;
        Ok(s)
    };
    let u32_at = |pos: &mut usize| -> Result<u32, ModelError> {
        Ok(u32::from_le_bytes(take(pos, 4)?.try_into().unwrap()))
    };
    let u64_at = |pos: &mut usize| -> Result<u64, ModelError> {
        Ok(u64::from_le_bytes(take(pos, 8)?.try_into().unwrap()))
    };
    if take(&mut pos, 4)? != CHECKPOINT_MAGIC {
        return Err(ModelError::BadCheckpoint("bad magic".into()));
    }
    let version = u32_at(&mut pos)?;
    if version != CHECKPOINT_VERSION {
        return Err(ModelError::BadCheckpoint(format!("unsupported version {version}")));
    }
    let vocab_size = u32_at(&mut pos)? as usize;
    let d_model = u32_at(&mut pos)? as usize;
    let n_heads = u32_at(&mut pos)? as usize;
    let d_head = u32_at(&mut pos)? as usize;
    let n_self_layers = u32_at(&mut pos)? as usize;
    let n_cross = u32_at(&mut pos)? as usize;
    let mut cross_windows = Vec::with_capacity(n_cross);
    for _ in 0..n_cross {
        let w = u64_at(&mut pos)?;
        cross_windows.push(if w == 0 { None } else { Some(w as usize) });
    }
    let m = u64_at(&mut pos)? as usize;
    let n = u64_at(&mut pos)? as usize;
    let dropout = f64::from_le_bytes(take(&mut pos, 8)?.try_into().unwrap());
    let seed = u64_at(&mut pos)?;
    let cfg = ModelConfig {
        vocab_size,
        d_model,
        n_heads,
        d_head,
        n_self_layers,
        cross_windows,
        m,
        n,
        dropout,
        seed,
    };
    cfg.validate()?;
    let declared = u64_at(&mut pos)?;
    if declared != count_params(&cfg)? {
        return Err(ModelError::BadCheckpoint(format!(
            "parameter count {declared} does not match config"
        )));
    }
    let mut params = Parameters::zeros(&cfg);
    for tensor in params.tensors_mut() {
        for v in tensor.iter_mut() {
            *v = f64::from_le_bytes(take(&mut pos, 8)?.try_into().unwrap());
        }
    }
    if pos != body.len() {
        return Err(ModelError::BadCheckpoint("trailing bytes".into()));
    }
    Ok((cfg, params))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_scale_parameter_count() {
        let cfg = ModelConfig::full_scale();
        assert_eq!(count_params(&cfg).unwrap(), 361_621_520);
    }

    #[test]
    fn toy_parameter_count_golden() {
        // derived once from the closed form:
        //   390*32 + 16*32 + 4 + 2*(6*32 + 12*1024) + 2*(4*32 + 12*1024)
        //   + 2*32 + 32*390 = 75_332
        let cfg = ModelConfig::toy();
        assert_eq!(count_params(&cfg).unwrap(), 75_332);
    }

    #[test]
    fn count_matches_allocation() {
        for cfg in [ModelConfig::toy(), ModelConfig {
            vocab_size: 11,
            d_model: 12,
            n_heads: 3,
            d_head: 4,
            n_self_layers: 1,
            cross_windows: vec![None],
            m: 6,
            n: 2,
            dropout: 0.0,
            seed: 1,
        }] {
            let params = Parameters::init(&cfg).unwrap();
            assert_eq!(params.num_params(), count_params(&cfg).unwrap());
        }
    }

    #[test]
    fn zero_vocab_rejected() {
        let cfg = ModelConfig { vocab_size: 0, ..ModelConfig::toy() };
        assert!(count_params(&cfg).is_err());
    }

    #[test]
    fn mismatched_heads_rejected() {
        let cfg = ModelConfig { n_heads: 5, ..ModelConfig::toy() };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn narrow_window_rejected() {
        let cfg = ModelConfig { cross_windows: vec![Some(2)], ..ModelConfig::toy() };
        assert!(cfg.validate().is_err(), "window below query length must fail");
    }

    #[test]
    fn init_is_deterministic_and_finite() {
        let cfg = ModelConfig::toy();
        let a = Parameters::init(&cfg).unwrap();
        let b = Parameters::init(&cfg).unwrap();
        assert_eq!(a, b);
        assert!(a.all_finite());
        let c = Parameters::init(&ModelConfig { seed: 1, ..cfg }).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn output_projection_starts_at_zero() {
        let params = Parameters::init(&ModelConfig::toy()).unwrap();
        assert!(params.output_projection.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn checkpoint_round_trip() {
        let cfg = ModelConfig::toy();
        let params = Parameters::init(&cfg).unwrap();
        let mut buf = Vec::new();
        save_checkpoint(&mut buf, &cfg, &params).unwrap();
        let (cfg2, params2) = load_checkpoint(&mut buf.as_slice()).unwrap();
        assert_eq!(cfg, cfg2);
        assert_eq!(params, params2);
    }

    #[test]
    fn checkpoint_detects_corruption() {
        let cfg = ModelConfig::toy();
        let params = Parameters::init(&cfg).unwrap();
        let mut buf = Vec::new();
        save_checkpoint(&mut buf, &cfg, &params).unwrap();
        let mid = buf.len() / 2;
        buf[mid] ^= 0x40;
        assert!(matches!(
            load_checkpoint(&mut buf.as_slice()),
            Err(ModelError::BadCheckpoint(_))
        ));
    }

    #[test]
    fn tensor_views_cover_everything_in_order() {
        let cfg = ModelConfig::toy();
        let mut params = Parameters::init(&cfg).unwrap();
        let names: Vec<String> = params.tensors().iter().map(|(n, _)| n.clone()).collect();
        assert_eq!(names[0], "token_embedding");
        assert_eq!(names.last().unwrap(), "output_projection");
        let immut_lens: Vec<usize> = params.tensors().iter().map(|(_, t)| t.len()).collect();
        let mut_lens: Vec<usize> = params.tensors_mut().iter().map(|t| t.len()).collect();
        assert_eq!(immut_lens, mut_lens);
    }
}
