//! Online conformal sparse compression (OCSC).
//!
//! At each step only symbols whose predictive probability reaches the
//! threshold `s_t = max(0, lambda_t)` keep their own codeword; every other
//! symbol is sent as the outage symbol `x_o`, which carries probability mass
//! `D` in the coding distribution. The decoder maps `x_o` to the most likely
//! symbol outside the high-probability set. `lambda_t` follows the online
//! conformal recursion `lambda - eta * (outage - D)`, which pins the long-run
//! outage frequency to `D` for every source sequence.

use crate::coder::{Codebook, Message};
use crate::error::{Error, Result};
use crate::types::{argmax_where, Distribution, Symbol};

pub const DEFAULT_ETA: f64 = 0.1;
pub const DEFAULT_LAMBDA0: f64 = 0.1;

/// Scalar state of an online conformal update.
///
/// `lambda` is the running parameter; the threshold (OCSC) or slope (OCRDC)
/// is always derived from it via [`ConformalState::level`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConformalState {
    pub lambda: f64,
    pub eta: f64,
    pub lambda0: f64,
    pub target: f64,
}

impl ConformalState {
    pub fn new(eta: f64, lambda0: f64, target: f64) -> Result<Self> {
        if !(eta > 0.0 && eta.is_finite()) {
            return Err(Error::Config(format!("step size eta = {eta} must be positive")));
        }
        if !lambda0.is_finite() {
            return Err(Error::Config(format!("lambda0 = {lambda0}")));
        }
        if !(target >= 0.0 && target.is_finite()) {
            return Err(Error::Config(format!("target distortion D = {target}")));
        }
        Ok(Self {
            lambda: lambda0,
            eta,
            lambda0,
            target,
        })
    }

    /// `s_t = max(0, lambda_t)`.
    pub fn level(&self) -> f64 {
        self.lambda.max(0.0)
    }
}

/// `lambda' = lambda - eta * (outage - D)`.
pub fn update_lambda(state: &mut ConformalState, outage: bool) {
    let out = if outage { 1.0 } else { 0.0 };
    state.lambda -= state.eta * (out - state.target);
}

/// Symbols with `p(x) >= s` (zero-probability symbols are never included).
pub fn high_prob_set(dist: &Distribution, s: f64) -> Vec<Symbol> {
    dist.probs()
        .iter()
        .enumerate()
        .filter(|&(_, &p)| p > 0.0 && p >= s)
        .map(|(i, _)| i)
        .collect()
}

/// What the encoder actually codes at a step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Coded {
    Symbol(Symbol),
    Outage,
}

impl Coded {
    pub fn symbol(self) -> Option<Symbol> {
        match self {
            Self::Symbol(s) => Some(s),
            Self::Outage => None,
        }
    }
}

/// Truncated coding distribution for one step.
#[derive(Debug, Clone)]
pub struct SparsePlan {
    in_set: Vec<bool>,
    /// Length `|X| + 1`; the last entry is the outage symbol.
    augmented: Vec<f64>,
    book: Codebook,
}

impl SparsePlan {
    /// Builds the augmented truncated distribution: mass `D` on `x_o` and
    /// `(1 - D) p(x) / p(X_t)` on each member of the set.
    ///
    /// An empty set (and `D = 1`, where members would get zero mass) collapses
    /// to the singleton `{x_o: 1}`.
    pub fn build(dist: &Distribution, s: f64, target: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&target) {
            return Err(Error::Config(format!(
                "outage target D = {target} outside [0, 1]"
            )));
        }
        let n = dist.len();
        let mut in_set = vec![false; n];
        let mut mass = 0.0;
        if target < 1.0 {
            for x in high_prob_set(dist, s) {
                in_set[x] = true;
                mass += dist.prob(x);
            }
        }
        let mut augmented = vec![0.0; n + 1];
        if mass > 0.0 {
            let scale = (1.0 - target) / mass;
            for (x, &member) in in_set.iter().enumerate() {
                if member {
                    augmented[x] = scale * dist.prob(x);
                }
            }
            augmented[n] = target;
        } else {
            augmented[n] = 1.0;
        }
        let book = Codebook::build(&augmented)?;
        Ok(Self {
            in_set,
            augmented,
            book,
        })
    }

    pub fn alphabet_size(&self) -> usize {
        self.in_set.len()
    }

    pub fn contains(&self, x: Symbol) -> bool {
        self.in_set[x]
    }

    pub fn set(&self) -> Vec<Symbol> {
        (0..self.in_set.len()).filter(|&x| self.in_set[x]).collect()
    }

    pub fn outage_index(&self) -> usize {
        self.in_set.len()
    }

    pub fn augmented(&self) -> &[f64] {
        &self.augmented
    }

    pub fn codebook(&self) -> &Codebook {
        &self.book
    }

    /// Probability of `coded` under the augmented distribution.
    pub fn coding_prob(&self, coded: Coded) -> f64 {
        match coded {
            Coded::Symbol(x) => self.augmented[x],
            Coded::Outage => self.augmented[self.outage_index()],
        }
    }

    /// Encodes `x` itself if it is in the set, the outage symbol otherwise.
    pub fn encode(&self, x: Symbol) -> Result<(Message, Coded)> {
        let coded = if self.in_set[x] {
            Coded::Symbol(x)
        } else {
            Coded::Outage
        };
        let idx = coded.symbol().unwrap_or(self.outage_index());
        Ok((self.book.encode(idx)?, coded))
    }

    /// Reconstruction for an error-free reception of `coded`.
    pub fn reconstruct(&self, dist: &Distribution, coded: Coded) -> Symbol {
        match coded {
            Coded::Symbol(x) => x,
            Coded::Outage => self.outage_reconstruction(dist),
        }
    }

    /// Most likely symbol outside the set; when the set covers the whole
    /// alphabet, the most likely symbol overall.
    pub fn outage_reconstruction(&self, dist: &Distribution) -> Symbol {
        argmax_where(dist.probs(), |x| !self.in_set[x]).unwrap_or_else(|| dist.argmax())
    }

    /// Decodes a received message into `(x_hat, outage_received)`.
    pub fn decode(&self, dist: &Distribution, bits: &[bool]) -> Result<(Symbol, bool)> {
        let (idx, _) = self.book.decode(bits)?;
        if idx == self.outage_index() {
            Ok((self.outage_reconstruction(dist), true))
        } else {
            Ok((idx, false))
        }
    }
}
