//! Sequence predictors producing the shared next-symbol distribution.
//!
//! Both ends of the link run an identical copy of the predictor on the
//! reconstructed history, so every predictor here is deterministic: the same
//! state and the same history always yield the same distribution, bit for bit.

use std::collections::HashMap;
use std::path::Path;

use crate::error::{Error, Result};
use crate::types::{Distribution, Symbol};

/// Default mixing weight of the uniform component.
pub const DEFAULT_SMOOTHING: f64 = 0.05;

/// Default Markov order.
pub const DEFAULT_ORDER: usize = 2;

#[derive(Debug, Clone)]
pub enum Predictor {
    Uniform { size: usize },
    Markov(MarkovPredictor),
    Scripted(ScriptedPredictor),
}

impl Predictor {
    pub fn uniform(size: usize) -> Self {
        Self::Uniform { size }
    }

    pub fn alphabet_size(&self) -> usize {
        match self {
            Self::Uniform { size } => *size,
            Self::Markov(m) => m.size,
            Self::Scripted(s) => s.size,
        }
    }

    /// Next-symbol distribution given the reconstructed history.
    pub fn predict(&self, history: &[Symbol]) -> Distribution {
        match self {
            Self::Uniform { size } => Distribution::uniform(*size),
            Self::Markov(m) => m.predict(history),
            Self::Scripted(s) => s.predict(history),
        }
    }

    /// Folds the reconstructed symbol into the model. Only Markov
    /// predictors learn; the other kinds ignore the call.
    pub fn online_update(&mut self, history: &[Symbol], observed: Symbol) {
        if let Self::Markov(m) = self {
            m.observe(history, observed);
        }
    }

    /// Upper bound `L` (bits) on `-log2 p(x)` over all symbols and contexts.
    pub fn cost_bound_bits(&self) -> Result<f64> {
        match self {
            Self::Uniform { size } => Ok((*size as f64).log2()),
            Self::Markov(m) => {
                if m.alpha > 0.0 {
                    Ok((m.size as f64 / m.alpha).log2())
                } else {
                    Err(Error::UnboundedPredictor)
                }
            }
            Self::Scripted(s) => match s.floor {
                Some(f) => Ok(-f.log2()),
                None => Err(Error::UnboundedPredictor),
            },
        }
    }
}

/// Order-`k` count model mixed with a uniform floor:
/// `(1 - alpha) * empirical + alpha / |X|`.
#[derive(Debug, Clone)]
pub struct MarkovPredictor {
    size: usize,
    order: usize,
    alpha: f64,
    contexts: HashMap<u64, Vec<u64>>,
    marginal: Vec<u64>,
}

impl MarkovPredictor {
    pub fn new(size: usize, order: usize, alpha: f64) -> Result<Self> {
        if size < 2 {
            return Err(Error::Alphabet(size));
        }
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(Error::Config(format!("smoothing alpha {alpha} outside (0, 1]")));
        }
        let fits = (0..order).try_fold(1u64, |acc, _| acc.checked_mul(size as u64));
        if fits.is_none() {
            return Err(Error::Config(format!(
                "order {order} context over {size} symbols does not fit a 64-bit key"
            )));
        }
        Ok(Self {
            size,
            order,
            alpha,
            contexts: HashMap::new(),
            marginal: vec![0; size],
        })
    }

    /// Builds a model from a training sequence.
    pub fn train(size: usize, order: usize, alpha: f64, corpus: &[Symbol]) -> Result<Self> {
        let mut m = Self::new(size, order, alpha)?;
        for (i, &x) in corpus.iter().enumerate() {
            if x >= size {
                return Err(Error::SymbolOutOfRange { symbol: x, size });
            }
            m.observe(&corpus[..i], x);
        }
        Ok(m)
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    fn key(&self, history: &[Symbol]) -> Option<u64> {
        if self.order == 0 || history.len() < self.order {
            return None;
        }
        let ctx = &history[history.len() - self.order..];
        Some(ctx.iter().fold(0u64, |k, &s| k * self.size as u64 + s as u64))
    }

    /// Raw counts for the context formed by the tail of `history`
    /// (the order-0 marginal when `order == 0`).
    pub fn counts(&self, history: &[Symbol]) -> Option<&[u64]> {
        match self.key(history) {
            None if self.order == 0 => Some(&self.marginal),
            None => None,
            Some(k) => self.contexts.get(&k).map(Vec::as_slice),
        }
    }

    pub fn predict(&self, history: &[Symbol]) -> Distribution {
        let counts = self
            .key(history)
            .and_then(|k| self.contexts.get(&k))
            .filter(|c| c.iter().any(|&n| n > 0))
            .unwrap_or(&self.marginal);
        let total: u64 = counts.iter().sum();
        let floor = self.alpha / self.size as f64;
        let probs = if total == 0 {
            vec![1.0 / self.size as f64; self.size]
        } else {
            let w = (1.0 - self.alpha) / total as f64;
            counts.iter().map(|&n| n as f64 * w + floor).collect()
        };
        Distribution::new(probs).expect("smoothed counts form a distribution")
    }

    pub fn observe(&mut self, history: &[Symbol], observed: Symbol) {
        self.marginal[observed] += 1;
        if let Some(k) = self.key(history) {
            let size = self.size;
            self.contexts.entry(k).or_insert_with(|| vec![0; size])[observed] += 1;
        }
    }
}

/// Replays a fixed sequence of distributions, one per step (wrapping).
#[derive(Debug, Clone)]
pub struct ScriptedPredictor {
    size: usize,
    script: Vec<Distribution>,
    floor: Option<f64>,
}

impl ScriptedPredictor {
    /// `floor`, when given, must lower-bound every scripted probability.
    pub fn new(script: Vec<Distribution>, floor: Option<f64>) -> Result<Self> {
        let size = script
            .first()
            .map(Distribution::len)
            .ok_or_else(|| Error::Config("empty predictor script".into()))?;
        if let Some((i, _)) = script.iter().enumerate().find(|(_, d)| d.len() != size) {
            return Err(Error::Config(format!("script line {i} has a different length")));
        }
        if let Some(f) = floor {
            if !(f > 0.0) {
                return Err(Error::Config(format!("declared floor {f} must be positive")));
            }
            if let Some(i) = script.iter().position(|d| d.min_prob() < f) {
                return Err(Error::Config(format!(
                    "script line {i} is below the declared floor"
                )));
            }
        }
        Ok(Self { size, script, floor })
    }

    /// Parses JSONL: one probability array per non-empty line.
    pub fn from_jsonl(text: &str, floor: Option<f64>) -> Result<Self> {
        let mut script = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let probs: Vec<f64> =
                serde_json::from_str(line).map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 1)))?;
            script.push(Distribution::new(probs)?);
        }
        Self::new(script, floor)
    }

    pub fn len(&self) -> usize {
        self.script.len()
    }

    pub fn is_empty(&self) -> bool {
        self.script.is_empty()
    }

    pub fn predict(&self, history: &[Symbol]) -> Distribution {
        self.script[history.len() % self.script.len()].clone()
    }
}

/// Decodes a little-endian `u16` symbol file.
pub fn corpus_from_u16le(bytes: &[u8]) -> Result<Vec<Symbol>> {
    if !bytes.len().is_multiple_of(2) {
        return Err(Error::Parse(format!("odd corpus length {}", bytes.len())));
    }
    Ok(bytes
        .chunks_exact(2)
        .map(|c| u16::from_le_bytes([c[0], c[1]]) as Symbol)
        .collect())
}

pub fn corpus_to_u16le(symbols: &[Symbol]) -> Result<Vec<u8>> {
    let mut out = Vec::with_capacity(symbols.len() * 2);
    for &s in symbols {
        let v = u16::try_from(s).map_err(|_| Error::Parse(format!("symbol {s} exceeds u16")))?;
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

pub fn corpus_from_json(text: &str) -> Result<Vec<Symbol>> {
    Ok(serde_json::from_str(text)?)
}

/// Loads a symbol corpus; `.json` files are JSON arrays, anything else is
/// read as `u16` little-endian.
pub fn load_corpus(path: &Path) -> Result<Vec<Symbol>> {
    if path.extension().is_some_and(|e| e == "json") {
        corpus_from_json(&std::fs::read_to_string(path)?)
    } else {
        corpus_from_u16le(&std::fs::read(path)?)
    }
}
