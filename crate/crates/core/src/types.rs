//! Alphabets, predictive distributions and per-symbol distortion measures.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Index of a source symbol in `0..alphabet.size()`.
pub type Symbol = usize;

/// Tolerance on the unit-sum check of a [`Distribution`].
pub const SUM_TOLERANCE: f64 = 1e-9;

/// A finite source alphabet identified by its size.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "usize", into = "usize")]
pub struct Alphabet(usize);

impl Alphabet {
    pub fn new(size: usize) -> Result<Self> {
        if size < 2 {
            return Err(Error::Alphabet(size));
        }
        Ok(Self(size))
    }

    pub fn size(self) -> usize {
        self.0
    }

    pub fn check(self, symbol: Symbol) -> Result<()> {
        if symbol >= self.0 {
            return Err(Error::SymbolOutOfRange { symbol, size: self.0 });
        }
        Ok(())
    }
}

impl TryFrom<usize> for Alphabet {
    type Error = Error;

    fn try_from(size: usize) -> Result<Self> {
        Self::new(size)
    }
}

impl From<Alphabet> for usize {
    fn from(a: Alphabet) -> usize {
        a.0
    }
}

/// Probability vector over an alphabet.
#[derive(Debug, Clone, PartialEq)]
pub struct Distribution {
    probs: Vec<f64>,
}

impl Distribution {
    /// Validates non-negativity and unit sum (within [`SUM_TOLERANCE`]).
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.len() < 2 {
            return Err(Error::Distribution(format!(
                "length {} is below the minimum alphabet size",
                probs.len()
            )));
        }
        let mut sum = 0.0;
        for (i, &p) in probs.iter().enumerate() {
            if !p.is_finite() || p < 0.0 {
                return Err(Error::Distribution(format!("entry {i} is {p}")));
            }
            sum += p;
        }
        if (sum - 1.0).abs() > SUM_TOLERANCE {
            return Err(Error::Distribution(format!("entries sum to {sum}")));
        }
        Ok(Self { probs })
    }

    /// Normalizes non-negative weights into a distribution.
    pub fn from_weights(weights: &[f64]) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) || !total.is_finite() || weights.iter().any(|w| *w < 0.0) {
            return Err(Error::Distribution("weights cannot be normalized".into()));
        }
        Self::new(weights.iter().map(|w| w / total).collect())
    }

    pub fn uniform(size: usize) -> Self {
        Self {
            probs: vec![1.0 / size as f64; size],
        }
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn prob(&self, x: Symbol) -> f64 {
        self.probs[x]
    }

    pub fn min_prob(&self) -> f64 {
        self.probs.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Most likely symbol; ties go to the smallest index.
    pub fn argmax(&self) -> Symbol {
        argmax_where(&self.probs, |_| true).expect("distribution is non-empty")
    }

    /// Shannon entropy in bits.
    pub fn entropy_bits(&self) -> f64 {
        self.probs
            .iter()
            .filter(|&&p| p > 0.0)
            .map(|&p| -p * p.log2())
            .sum()
    }
}

/// Index of the largest value among entries accepted by `keep`, smallest
/// index on ties.
pub(crate) fn argmax_where(values: &[f64], keep: impl Fn(usize) -> bool) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, &v) in values.iter().enumerate() {
        if !keep(i) {
            continue;
        }
        match best {
            Some((_, b)) if v <= b => {}
            _ => best = Some((i, v)),
        }
    }
    best.map(|(i, _)| i)
}

/// 0-1 loss `1{x != x_hat}`.
pub fn outage_distortion(x: Symbol, x_hat: Symbol) -> f64 {
    if x == x_hat {
        0.0
    } else {
        1.0
    }
}

/// Bounded per-symbol distortion `d(x, x_hat)`.
#[derive(Debug, Clone, PartialEq)]
pub enum DistortionMeasure {
    Outage,
    Matrix {
        /// Row-major `size * size` table indexed by `(x, x_hat)`.
        table: Vec<f64>,
        size: usize,
        d_max: f64,
    },
}

impl DistortionMeasure {
    /// Builds a matrix measure, checking the zero diagonal and the
    /// `[0, d_max]` range.
    pub fn matrix(rows: Vec<Vec<f64>>, d_max: f64) -> Result<Self> {
        let size = rows.len();
        if size < 2 {
            return Err(Error::Distortion("matrix needs at least 2 rows".into()));
        }
        if !(d_max.is_finite() && d_max > 0.0) {
            return Err(Error::Distortion(format!("d_max = {d_max}")));
        }
        let mut table = Vec::with_capacity(size * size);
        for (i, row) in rows.into_iter().enumerate() {
            if row.len() != size {
                return Err(Error::Distortion(format!("row {i} has length {}", row.len())));
            }
            for (j, v) in row.into_iter().enumerate() {
                if i == j && v != 0.0 {
                    return Err(Error::Distortion(format!("d({i},{i}) = {v}")));
                }
                if !(0.0..=d_max).contains(&v) {
                    return Err(Error::Distortion(format!(
                        "d({i},{j}) = {v} outside [0, {d_max}]"
                    )));
                }
                table.push(v);
            }
        }
        Ok(Self::Matrix { table, size, d_max })
    }

    /// Normalized cosine dissimilarity `(1 - cos(phi(x), phi(x_hat))) / 2`.
    pub fn cosine_from_embeddings(embeddings: &[Vec<f64>]) -> Result<Self> {
        let size = embeddings.len();
        if size < 2 {
            return Err(Error::Distortion("need at least 2 embeddings".into()));
        }
        let dim = embeddings[0].len();
        let mut norms = Vec::with_capacity(size);
        for (i, e) in embeddings.iter().enumerate() {
            if e.len() != dim {
                return Err(Error::Distortion(format!(
                    "embedding {i} has dimension {}, expected {dim}",
                    e.len()
                )));
            }
            let n = e.iter().map(|v| v * v).sum::<f64>().sqrt();
            if !(n > 0.0) || !n.is_finite() {
                return Err(Error::ZeroNormEmbedding(i));
            }
            norms.push(n);
        }
        let mut table = vec![0.0; size * size];
        for i in 0..size {
            for j in (i + 1)..size {
                let dot: f64 = embeddings[i].iter().zip(&embeddings[j]).map(|(a, b)| a * b).sum();
                let cos = (dot / (norms[i] * norms[j])).clamp(-1.0, 1.0);
                let d = 0.5 * (1.0 - cos);
                table[i * size + j] = d;
                table[j * size + i] = d;
            }
        }
        Ok(Self::Matrix {
            table,
            size,
            d_max: 1.0,
        })
    }

    /// Reads a JSON array of embedding vectors and builds the cosine measure.
    pub fn cosine_from_json(text: &str) -> Result<Self> {
        let embeddings: Vec<Vec<f64>> = serde_json::from_str(text)?;
        Self::cosine_from_embeddings(&embeddings)
    }

    pub fn cosine_from_file(path: &Path) -> Result<Self> {
        Self::cosine_from_json(&std::fs::read_to_string(path)?)
    }

    /// The 0/1 matrix equivalent to [`DistortionMeasure::Outage`].
    pub fn outage_matrix(size: usize) -> Self {
        let mut table = vec![1.0; size * size];
        for i in 0..size {
            table[i * size + i] = 0.0;
        }
        Self::Matrix {
            table,
            size,
            d_max: 1.0,
        }
    }

    pub fn d_max(&self) -> f64 {
        match self {
            Self::Outage => 1.0,
            Self::Matrix { d_max, .. } => *d_max,
        }
    }

    /// Alphabet size the measure was built for, if it is fixed.
    pub fn size(&self) -> Option<usize> {
        match self {
            Self::Outage => None,
            Self::Matrix { size, .. } => Some(*size),
        }
    }

    pub fn is_outage(&self) -> bool {
        matches!(self, Self::Outage)
    }

    /// `d(x, x_hat)`. Panics if a matrix index is out of range; use
    /// [`DistortionMeasure::try_eval`] for checked access.
    pub fn eval(&self, x: Symbol, x_hat: Symbol) -> f64 {
        match self {
            Self::Outage => outage_distortion(x, x_hat),
            Self::Matrix { table, size, .. } => {
                assert!(x < *size && x_hat < *size, "symbol outside distortion table");
                table[x * size + x_hat]
            }
        }
    }

    pub fn try_eval(&self, x: Symbol, x_hat: Symbol) -> Result<f64> {
        if let Self::Matrix { size, .. } = self {
            for s in [x, x_hat] {
                if s >= *size {
                    return Err(Error::SymbolOutOfRange {
                        symbol: s,
                        size: *size,
                    });
                }
            }
        }
        Ok(self.eval(x, x_hat))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn outage_examples() {
        assert_eq!(outage_distortion(3, 3), 0.0);
        assert_eq!(outage_distortion(3, 7), 1.0);
        assert_eq!(outage_distortion(0, 1), 1.0);
    }

    #[test]
    fn cosine_examples() {
        let m = DistortionMeasure::cosine_from_embeddings(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        assert_eq!(m.eval(0, 0), 0.0);
        assert_eq!(m.eval(0, 1), 0.5);
        assert_eq!(m.eval(1, 0), 0.5);

        let m = DistortionMeasure::cosine_from_embeddings(&[vec![1.0, 0.0], vec![-1.0, 0.0]]).unwrap();
        assert_eq!(m.eval(0, 1), 1.0);

        let same = vec![vec![0.3, -1.2, 2.0]; 5];
        let m = DistortionMeasure::cosine_from_embeddings(&same).unwrap();
        for i in 0..5 {
            for j in 0..5 {
                assert!(m.eval(i, j).abs() < 1e-12);
            }
        }
        assert_eq!(m.d_max(), 1.0);
    }

    #[test]
    fn zero_norm_rejected() {
        let err = DistortionMeasure::cosine_from_embeddings(&[vec![1.0, 0.0], vec![0.0, 0.0]]);
        assert!(matches!(err, Err(Error::ZeroNormEmbedding(1))));
    }

    #[test]
    fn outage_matrix_matches_indicator() {
        let m = DistortionMeasure::outage_matrix(16);
        for i in 0..16 {
            for j in 0..16 {
                assert_eq!(m.eval(i, j), outage_distortion(i, j));
            }
        }
    }

    #[test]
    fn matrix_validation() {
        assert!(DistortionMeasure::matrix(vec![vec![0.0, 0.4], vec![0.4, 0.1]], 1.0).is_err());
        assert!(DistortionMeasure::matrix(vec![vec![0.0, 1.5], vec![0.4, 0.0]], 1.0).is_err());
        let m = DistortionMeasure::matrix(vec![vec![0.0, 0.4], vec![0.7, 0.0]], 1.0).unwrap();
        assert_eq!(m.eval(1, 0), 0.7);
        assert!(m.try_eval(2, 0).is_err());
    }

    #[test]
    fn distribution_checks() {
        assert!(Distribution::new(vec![0.5, 0.5]).is_ok());
        assert!(Distribution::new(vec![0.5, 0.6]).is_err());
        assert!(Distribution::new(vec![1.5, -0.5]).is_err());
        assert!(Distribution::new(vec![1.0]).is_err());
        let d = Distribution::new(vec![0.4, 0.4, 0.2]).unwrap();
        assert_eq!(d.argmax(), 0);
        assert_eq!(Distribution::uniform(7).argmax(), 0);
    }

    #[test]
    fn alphabet_bounds() {
        assert!(Alphabet::new(1).is_err());
        let a = Alphabet::new(4).unwrap();
        assert!(a.check(3).is_ok());
        assert!(a.check(4).is_err());
    }
}
