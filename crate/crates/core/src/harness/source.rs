//! Symbol sources: seeded sparse Markov chains, concatenations of them with
//! recorded segment boundaries, and fixed sequences.

use std::path::PathBuf;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution as _, Exp1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::config::derive_seed;
use crate::predictor::load_corpus;
use crate::types::Symbol;

/// Parameters of a synthetic Markov chain. Each context moves to one of
/// `branching` preferred successors with exponential random weights, plus a
/// `leak` of probability spread uniformly over the whole alphabet.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarkovSourceSpec {
    #[serde(default = "default_size")]
    pub size: usize,
    #[serde(default = "default_order")]
    pub order: usize,
    #[serde(default = "default_branching")]
    pub branching: usize,
    #[serde(default = "default_leak")]
    pub leak: f64,
    #[serde(default)]
    pub model_seed: u64,
}

fn default_size() -> usize {
    64
}
fn default_order() -> usize {
    2
}
fn default_branching() -> usize {
    4
}
fn default_leak() -> f64 {
    0.02
}

impl Default for MarkovSourceSpec {
    fn default() -> Self {
        Self {
            size: default_size(),
            order: default_order(),
            branching: default_branching(),
            leak: default_leak(),
            model_seed: 0,
        }
    }
}

/// A materialized Markov chain; row `c` of `table` is the next-symbol law
/// for context index `c`.
#[derive(Debug, Clone)]
pub struct MarkovSource {
    size: usize,
    order: usize,
    table: Vec<f64>,
}

impl MarkovSource {
    pub fn new(spec: &MarkovSourceSpec) -> Result<Self> {
        let MarkovSourceSpec {
            size,
            order,
            branching,
            leak,
            model_seed,
        } = *spec;
        if size < 2 || branching == 0 || branching > size || !(0.0..=1.0).contains(&leak) {
            return Err(Error::Config(format!("bad Markov source {spec:?}")));
        }
        let contexts = u32::try_from(order)
            .ok()
            .and_then(|o| size.checked_pow(o))
            .filter(|&c| c.checked_mul(size).is_some_and(|n| n <= 1 << 26))
            .ok_or_else(|| Error::Config(format!("source state space too large: {spec:?}")))?;
        let mut rng = ChaCha8Rng::seed_from_u64(model_seed);
        let mut table = vec![leak / size as f64; contexts * size];
        for row in table.chunks_mut(size) {
            let succ = index::sample(&mut rng, size, branching);
            let w: Vec<f64> = (0..branching).map(|_| Exp1.sample(&mut rng)).collect();
            let total: f64 = w.iter().sum();
            for (s, wi) in succ.iter().zip(w) {
                row[s] += (1.0 - leak) * wi / total;
            }
        }
        Ok(Self { size, order, table })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    fn context(&self, history: &[Symbol]) -> usize {
        (0..self.order).fold(0, |k, i| {
            let s = history
                .len()
                .checked_sub(self.order - i)
                .map_or(0, |j| history[j]);
            k * self.size + s
        })
    }

    /// Next-symbol law after `history` (missing history reads as symbol 0).
    pub fn law(&self, history: &[Symbol]) -> &[f64] {
        let c = self.context(history);
        &self.table[c * self.size..(c + 1) * self.size]
    }

    pub fn sample_path(&self, len: usize, seed: u64) -> Vec<Symbol> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = Vec::with_capacity(len);
        for _ in 0..len {
            let u: f64 = rng.random();
            let law = self.law(&out);
            let mut acc = 0.0;
            let mut next = self.size - 1;
            for (s, &p) in law.iter().enumerate() {
                acc += p;
                if u < acc {
                    next = s;
                    break;
                }
            }
            out.push(next);
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Segment {
    pub source: MarkovSourceSpec,
    pub len: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SourceSpec {
    Markov {
        #[serde(flatten)]
        spec: MarkovSourceSpec,
    },
    /// Symbols from a `u16` little-endian or JSON file; the first `T` are used.
    File {
        path: PathBuf,
    },
    Inline {
        symbols: Vec<Symbol>,
    },
    /// Back-to-back Markov segments with different statistics.
    Concat {
        segments: Vec<Segment>,
    },
}

impl Default for SourceSpec {
    fn default() -> Self {
        Self::Markov {
            spec: MarkovSourceSpec::default(),
        }
    }
}

/// A generated sequence and the start index of every segment after the first.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceSample {
    pub symbols: Vec<Symbol>,
    pub boundaries: Vec<usize>,
}

impl SourceSpec {
    /// Alphabet size implied by the source, if any.
    pub fn alphabet_hint(&self) -> Option<usize> {
        match self {
            Self::Markov { spec } => Some(spec.size),
            Self::Concat { segments } => segments.first().map(|s| s.source.size),
            _ => None,
        }
    }

    pub fn generate(&self, alphabet: usize, horizon: usize, seed: u64) -> Result<SourceSample> {
        let symbols = match self {
            Self::Markov { spec } => MarkovSource::new(spec)?.sample_path(horizon, seed),
            Self::File { path } => take_prefix(load_corpus(path)?, horizon)?,
            Self::Inline { symbols } => take_prefix(symbols.clone(), horizon)?,
            Self::Concat { segments } => {
                return nonstationary_source(segments, horizon, seed);
            }
        };
        if let Some(&bad) = symbols.iter().find(|&&s| s >= alphabet) {
            return Err(Error::SymbolOutOfRange {
                symbol: bad,
                size: alphabet,
            });
        }
        Ok(SourceSample {
            symbols,
            boundaries: Vec::new(),
        })
    }

    /// Independent training path with the same statistics, where the source
    /// can produce one.
    pub fn training_corpus(&self, alphabet: usize, len: usize, seed: u64) -> Result<Option<Vec<Symbol>>> {
        match self {
            Self::Markov { .. } => Ok(Some(self.generate(alphabet, len, seed)?.symbols)),
            Self::Concat { segments } if !segments.is_empty() => {
                let share = len / segments.len();
                let mut out = Vec::with_capacity(len);
                for (i, seg) in segments.iter().enumerate() {
                    out.extend(
                        MarkovSource::new(&seg.source)?.sample_path(share, derive_seed(seed, i as u64)),
                    );
                }
                Ok(Some(out))
            }
            _ => Ok(None),
        }
    }
}

fn take_prefix(mut symbols: Vec<Symbol>, horizon: usize) -> Result<Vec<Symbol>> {
    if symbols.len() < horizon {
        return Err(Error::Config(format!(
            "source has {} symbols, T = {horizon}",
            symbols.len()
        )));
    }
    symbols.truncate(horizon);
    Ok(symbols)
}

/// Concatenates independently seeded Markov segments. Each segment starts
/// from an empty context.
pub fn nonstationary_source(segments: &[Segment], horizon: usize, seed: u64) -> Result<SourceSample> {
    let total: usize = segments.iter().map(|s| s.len).sum();
    if segments.is_empty() || total != horizon {
        return Err(Error::Config(format!(
            "segment lengths sum to {total}, T = {horizon}"
        )));
    }
    if segments.windows(2).any(|w| w[0].source.size != w[1].source.size) {
        return Err(Error::Config("segments disagree on alphabet size".into()));
    }
    let mut symbols = Vec::with_capacity(horizon);
    let mut boundaries = Vec::new();
    for (i, seg) in segments.iter().enumerate() {
        if i > 0 {
            boundaries.push(symbols.len());
        }
        let src = MarkovSource::new(&seg.source)?;
        symbols.extend(src.sample_path(seg.len, derive_seed(seed, i as u64)));
    }
    Ok(SourceSample { symbols, boundaries })
}
