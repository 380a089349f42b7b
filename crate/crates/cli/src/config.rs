//! Flat `key = value` run configuration.
//!
//! One assignment per line, `#` comments, no nesting. Unknown keys are
//! rejected so typos fail loudly before any long-running stage.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use cadenza_core::model::{ModelConfig, SamplingConfig, TrainConfig};

const KNOWN_KEYS: &[&str] = &[
    "model.vocab_size",
    "model.d_model",
    "model.n_heads",
    "model.d_head",
    "model.n_self_layers",
    "model.cross_windows",
    "model.m",
    "model.n",
    "model.dropout",
    "model.seed",
    "train.scale",
    "train.warmup_steps",
    "train.steps",
    "train.batch_size",
    "train.seed",
    "sample.top_p",
    "sample.temperature",
    "sample.max_tokens",
    "sample.seed",
    "data.tokens",
    "data.mode",
    "data.access",
    "eval.segments",
];

#[derive(Debug, Clone, Default)]
pub struct RunConfig {
    values: BTreeMap<String, String>,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut values = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| anyhow!("line {}: expected `key = value`", lineno + 1))?;
            let key = key.trim().to_string();
            if !KNOWN_KEYS.contains(&key.as_str()) {
                bail!("line {}: unknown key `{key}`", lineno + 1);
            }
            if values.insert(key.clone(), value.trim().to_string()).is_some() {
                bail!("line {}: key `{key}` set twice", lineno + 1);
            }
        }
        Ok(Self { values })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(|s| s.as_str())
    }

    fn parsed<T: std::str::FromStr>(&self, key: &str, default: T) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        match self.values.get(key) {
            Some(raw) => raw.parse().map_err(|e| anyhow!("key `{key}`: {e}")),
            None => Ok(default),
        }
    }

    /// Model configuration; defaults are the toy scale.
    pub fn model(&self) -> Result<ModelConfig> {
        let toy = ModelConfig::toy();
        let cross_windows = match self.values.get("model.cross_windows") {
            Some(raw) => raw
                .split(',')
                .map(|item| {
                    let item = item.trim();
                    if item.eq_ignore_ascii_case("full") {
                        Ok(None)
                    } else {
                        item.parse::<usize>()
                            .map(Some)
                            .map_err(|e| anyhow!("model.cross_windows `{item}`: {e}"))
                    }
                })
                .collect::<Result<Vec<_>>>()?,
            None => toy.cross_windows.clone(),
        };
        let cfg = ModelConfig {
            vocab_size: self.parsed("model.vocab_size", toy.vocab_size)?,
            d_model: self.parsed("model.d_model", toy.d_model)?,
            n_heads: self.parsed("model.n_heads", toy.n_heads)?,
            d_head: self.parsed("model.d_head", toy.d_head)?,
            n_self_layers: self.parsed("model.n_self_layers", toy.n_self_layers)?,
            cross_windows,
            m: self.parsed("model.m", toy.m)?,
            n: self.parsed("model.n", toy.n)?,
            dropout: self.parsed("model.dropout", 0.0)?,
            seed: self.parsed("model.seed", 0u64)?,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn train(&self) -> Result<TrainConfig> {
        let def = TrainConfig::default();
        Ok(TrainConfig {
            scale: self.parsed("train.scale", def.scale)?,
            warmup_steps: self.parsed("train.warmup_steps", def.warmup_steps)?,
            steps: self.parsed("train.steps", def.steps)?,
            seed: self.parsed("train.seed", def.seed)?,
            ..def
        })
    }

    pub fn batch_size(&self) -> Result<usize> {
        let b: usize = self.parsed("train.batch_size", 1)?;
        if b == 0 {
            bail!("train.batch_size must be positive");
        }
        Ok(b)
    }

    pub fn sampling(&self) -> Result<SamplingConfig> {
        let def = SamplingConfig::default();
        let cfg = SamplingConfig {
            top_p: self.parsed("sample.top_p", def.top_p)?,
            temperature: self.parsed("sample.temperature", def.temperature)?,
            max_tokens: self.parsed("sample.max_tokens", def.max_tokens)?,
            seed: self.parsed("sample.seed", def.seed)?,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn eval_segments(&self) -> Result<usize> {
        let s: usize = self.parsed("eval.segments", 64)?;
        if s == 0 {
            bail!("eval.segments must be positive");
        }
        Ok(s)
    }
}
