//! Run configuration: JSON schema with serde defaults, plus the builder that
//! turns a configuration into concrete episode components.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution as _, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::adaptive::Family;
use crate::channel::{ChannelSpec, Psi};
use crate::error::{Error, Result};
use crate::harness::source::SourceSpec;
use crate::predictor::{
    load_corpus, MarkovPredictor, Predictor, ScriptedPredictor, DEFAULT_ORDER, DEFAULT_SMOOTHING,
};
use crate::types::DistortionMeasure;

/// Seed streams; each consumer of randomness draws from its own.
pub mod stream {
    pub const SOURCE: u64 = 1;
    pub const TRAIN: u64 = 2;
    pub const CHANNEL: u64 = 3;
    pub const DROPOUT: u64 = 4;
}

/// Independent 64-bit seed for `stream` under the master `seed`.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng.next_u64()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Ocsc,
    Ocrdc,
    CaOcsc,
    CaOcrdc,
    LlmzipDropout,
    BlockCsc,
    BlockCrdc,
}

impl Scheme {
    pub const ALL: [Scheme; 7] = [
        Self::Ocsc,
        Self::Ocrdc,
        Self::CaOcsc,
        Self::CaOcrdc,
        Self::LlmzipDropout,
        Self::BlockCsc,
        Self::BlockCrdc,
    ];

    /// Compressor family, or `None` for the dropout baseline.
    pub fn family(self) -> Option<Family> {
        match self {
            Self::Ocsc | Self::CaOcsc | Self::BlockCsc => Some(Family::Sparse),
            Self::Ocrdc | Self::CaOcrdc | Self::BlockCrdc => Some(Family::RateDistortion),
            Self::LlmzipDropout => None,
        }
    }

    pub fn is_adaptive(self) -> bool {
        matches!(self, Self::CaOcsc | Self::CaOcrdc)
    }

    pub fn is_online(self) -> bool {
        matches!(self, Self::Ocsc | Self::Ocrdc | Self::CaOcsc | Self::CaOcrdc)
    }

    pub fn is_block(self) -> bool {
        matches!(self, Self::BlockCsc | Self::BlockCrdc)
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Ocsc => "OCSC",
            Self::Ocrdc => "OCRDC",
            Self::CaOcsc => "CA-OCSC",
            Self::CaOcrdc => "CA-OCRDC",
            Self::LlmzipDropout => "LLMZip-Dropout",
            Self::BlockCsc => "Block-CSC",
            Self::BlockCrdc => "Block-CRDC",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key: String = s
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .map(|c| c.to_ascii_lowercase())
            .collect();
        Self::ALL
            .into_iter()
            .find(|sc| {
                let name: String = sc
                    .name()
                    .chars()
                    .filter(|c| c.is_ascii_alphanumeric())
                    .map(|c| c.to_ascii_lowercase())
                    .collect();
                name == key
            })
            .ok_or_else(|| Error::Parse(format!("unknown scheme {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PredictorSpec {
    Uniform,
    Markov {
        #[serde(default = "default_order")]
        order: usize,
        #[serde(default = "default_alpha")]
        alpha: f64,
        /// Length of the training path drawn from a synthetic source.
        #[serde(default = "default_train_len")]
        train_len: usize,
        /// Training corpus file; overrides `train_len`.
        #[serde(default)]
        corpus: Option<PathBuf>,
        /// Keep learning from the reconstructed history.
        #[serde(default)]
        online: bool,
    },
    /// JSONL file with one probability vector per step.
    Scripted {
        path: PathBuf,
        #[serde(default)]
        floor: Option<f64>,
    },
}

fn default_order() -> usize {
    DEFAULT_ORDER
}
fn default_alpha() -> f64 {
    DEFAULT_SMOOTHING
}
fn default_train_len() -> usize {
    20_000
}

impl Default for PredictorSpec {
    fn default() -> Self {
        Self::Markov {
            order: DEFAULT_ORDER,
            alpha: DEFAULT_SMOOTHING,
            train_len: default_train_len(),
            corpus: None,
            online: false,
        }
    }
}

impl PredictorSpec {
    pub fn online(&self) -> bool {
        matches!(self, Self::Markov { online: true, .. })
    }

    pub fn build(&self, alphabet: usize, source: &SourceSpec, seed: u64) -> Result<Predictor> {
        match self {
            Self::Uniform => Ok(Predictor::uniform(alphabet)),
            Self::Markov {
                order,
                alpha,
                train_len,
                corpus,
                ..
            } => {
                let training = match corpus {
                    Some(path) => load_corpus(path)?,
                    None => source
                        .training_corpus(alphabet, *train_len, derive_seed(seed, stream::TRAIN))?
                        .unwrap_or_default(),
                };
                Ok(Predictor::Markov(MarkovPredictor::train(
                    alphabet, *order, *alpha, &training,
                )?))
            }
            Self::Scripted { path, floor } => {
                let p = ScriptedPredictor::from_jsonl(&std::fs::read_to_string(path)?, *floor)?;
                let pred = Predictor::Scripted(p);
                if pred.alphabet_size() != alphabet {
                    return Err(Error::Config(format!(
                        "scripted predictor has {} symbols, alphabet is {alphabet}",
                        pred.alphabet_size()
                    )));
                }
                Ok(pred)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DistortionSpec {
    #[default]
    Outage,
    /// Cosine dissimilarity of embeddings read from a JSON array of vectors.
    Cosine {
        path: PathBuf,
    },
    /// Cosine dissimilarity of seeded Gaussian embeddings.
    RandomCosine {
        #[serde(default = "default_dim")]
        dim: usize,
        #[serde(default)]
        seed: u64,
    },
    Matrix {
        rows: Vec<Vec<f64>>,
        d_max: f64,
    },
}

fn default_dim() -> usize {
    16
}

/// Seeded standard-normal embeddings, `size` vectors of length `dim`.
pub fn gaussian_embeddings(size: usize, dim: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..size)
        .map(|_| (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect())
        .collect()
}

impl DistortionSpec {
    pub fn build(&self, alphabet: usize) -> Result<DistortionMeasure> {
        let m = match self {
            Self::Outage => DistortionMeasure::Outage,
            Self::Cosine { path } => DistortionMeasure::cosine_from_file(path)?,
            Self::RandomCosine { dim, seed } => {
                if *dim == 0 {
                    return Err(Error::Config("embedding dimension must be positive".into()));
                }
                DistortionMeasure::cosine_from_embeddings(&gaussian_embeddings(alphabet, *dim, *seed))?
            }
            Self::Matrix { rows, d_max } => DistortionMeasure::matrix(rows.clone(), *d_max)?,
        };
        if let Some(n) = m.size() {
            if n != alphabet {
                return Err(Error::Config(format!(
                    "distortion covers {n} symbols, alphabet is {alphabet}"
                )));
            }
        }
        Ok(m)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Hyperparameters {
    #[serde(rename = "D")]
    pub target: f64,
    #[serde(default = "default_eta")]
    pub eta: f64,
    #[serde(default = "default_lambda0")]
    pub lambda0: f64,
    /// Drain margin for the adaptive schemes; `min(0.05, D / 2)` when absent.
    #[serde(default)]
    pub epsilon: Option<f64>,
}

fn default_eta() -> f64 {
    crate::ocsc::DEFAULT_ETA
}
fn default_lambda0() -> f64 {
    crate::ocsc::DEFAULT_LAMBDA0
}

impl Default for Hyperparameters {
    fn default() -> Self {
        Self {
            target: 0.2,
            eta: default_eta(),
            lambda0: default_lambda0(),
            epsilon: None,
        }
    }
}

impl Hyperparameters {
    pub fn epsilon(&self) -> f64 {
        self.epsilon
            .unwrap_or_else(|| crate::adaptive::default_epsilon(self.target))
    }
}

/// Geometric grid of levels for the offline block baselines; `0` is
/// always evaluated as well.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlockGrid {
    pub s_min: f64,
    pub s_max: f64,
    pub points: usize,
}

impl BlockGrid {
    pub fn default_for(family: Family) -> Self {
        match family {
            Family::Sparse => Self {
                s_min: 1e-4,
                s_max: 1.0,
                points: 60,
            },
            Family::RateDistortion => Self {
                s_min: 1e-2,
                s_max: 1e3,
                points: 60,
            },
        }
    }

    /// `0` followed by the geometric grid in increasing order.
    pub fn levels(&self) -> Result<Vec<f64>> {
        if !(self.s_min > 0.0 && self.s_max >= self.s_min && self.s_max.is_finite()) || self.points == 0 {
            return Err(Error::Config(format!("bad block grid {self:?}")));
        }
        let mut out = vec![0.0];
        if self.points == 1 {
            out.push(self.s_min);
            return Ok(out);
        }
        let ratio = (self.s_max / self.s_min).powf(1.0 / (self.points - 1) as f64);
        out.extend((0..self.points).map(|i| self.s_min * ratio.powi(i as i32)));
        Ok(out)
    }
}

/// Envelope model of the erasure pattern, used to evaluate the
/// deterministic-channel guarantee.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvelopeSpec {
    #[serde(rename = "A")]
    pub a: f64,
    pub psi: Psi,
    #[serde(default = "default_tau_cap")]
    pub tau_cap: u64,
}

fn default_tau_cap() -> u64 {
    1_000_000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default)]
    pub dir: Option<PathBuf>,
    #[serde(default = "default_true")]
    pub trace: bool,
    #[serde(default = "default_window")]
    pub window: usize,
}

fn default_true() -> bool {
    true
}
fn default_window() -> usize {
    250
}

impl Default for OutputSpec {
    fn default() -> Self {
        Self {
            dir: None,
            trace: true,
            window: default_window(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub scheme: Scheme,
    #[serde(default = "default_alphabet")]
    pub alphabet: usize,
    #[serde(rename = "T", alias = "horizon", default = "default_horizon")]
    pub horizon: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub source: SourceSpec,
    #[serde(default)]
    pub predictor: PredictorSpec,
    #[serde(default)]
    pub distortion: DistortionSpec,
    #[serde(default = "default_channel")]
    pub channel: ChannelSpec,
    #[serde(default)]
    pub hyperparameters: Hyperparameters,
    #[serde(default)]
    pub block: Option<BlockGrid>,
    #[serde(default)]
    pub envelope: Option<EnvelopeSpec>,
    #[serde(default)]
    pub output: OutputSpec,
}

fn default_alphabet() -> usize {
    64
}
fn default_horizon() -> usize {
    5000
}
fn default_channel() -> ChannelSpec {
    ChannelSpec::Ideal
}

impl RunConfig {
    pub fn new(scheme: Scheme) -> Self {
        Self {
            scheme,
            alphabet: default_alphabet(),
            horizon: default_horizon(),
            seed: 0,
            source: SourceSpec::default(),
            predictor: PredictorSpec::default(),
            distortion: DistortionSpec::default(),
            channel: default_channel(),
            hyperparameters: Hyperparameters::default(),
            block: None,
            envelope: None,
            output: OutputSpec::default(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        crate::types::Alphabet::new(self.alphabet)?;
        if self.horizon == 0 {
            return Err(Error::Config("T must be at least 1".into()));
        }
        let h = &self.hyperparameters;
        if !(0.0..=1.0).contains(&h.target) && self.scheme.family() != Some(Family::RateDistortion) {
            return Err(Error::Config(format!("D = {} outside [0, 1]", h.target)));
        }
        if !(h.target >= 0.0 && h.target.is_finite()) {
            return Err(Error::Config(format!("D = {}", h.target)));
        }
        if !(h.eta > 0.0 && h.eta.is_finite()) || !h.lambda0.is_finite() {
            return Err(Error::Config(format!("eta = {}, lambda0 = {}", h.eta, h.lambda0)));
        }
        if self.scheme.is_adaptive() {
            let eps = h.epsilon();
            if !(eps > 0.0 && h.target - eps > 0.0) {
                return Err(Error::Config(format!(
                    "adaptive schemes need 0 < eps < D, got D = {}, eps = {eps}",
                    h.target
                )));
            }
        }
        self.channel.validate()?;
        if let Some(n) = self.source.alphabet_hint() {
            if n != self.alphabet {
                return Err(Error::Config(format!(
                    "source has {n} symbols, alphabet is {}",
                    self.alphabet
                )));
            }
        }
        if let Some(g) = &self.block {
            g.levels()?;
        }
        Ok(())
    }
}
