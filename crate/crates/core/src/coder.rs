//! Canonical Shannon code: per-symbol, zero-delay, prefix-free.
//!
//! Lengths are `ceil(-log2 p)`; symbols are ordered by descending
//! probability (ascending index on ties) and receive canonical codewords in
//! that order, so encoder and decoder rebuild identical books from the same
//! distribution without exchanging anything.

use std::fmt;

use crate::error::{Error, Result};
use crate::types::{Symbol, SUM_TOLERANCE};

/// A finite bit string.
#[derive(Clone, Default, PartialEq, Eq, Hash)]
pub struct Bits(Vec<bool>);

impl Bits {
    pub fn new() -> Self {
        Self(Vec::new())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn push(&mut self, bit: bool) {
        self.0.push(bit);
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.0
    }

    pub fn starts_with(&self, prefix: &Bits) -> bool {
        self.0.starts_with(&prefix.0)
    }

    /// Packs MSB-first; the last byte is zero-padded.
    pub fn to_bytes(&self) -> Vec<u8> {
        self.0
            .chunks(8)
            .map(|c| {
                c.iter()
                    .enumerate()
                    .fold(0u8, |b, (i, &v)| b | (u8::from(v) << (7 - i)))
            })
            .collect()
    }

    /// Unpacks `nbits` bits MSB-first from `bytes`.
    pub fn from_bytes(bytes: &[u8], nbits: usize) -> Result<Self> {
        if nbits > bytes.len() * 8 {
            return Err(Error::Parse(format!(
                "{nbits} bits requested from {} bytes",
                bytes.len()
            )));
        }
        Ok(Self(
            (0..nbits).map(|i| bytes[i / 8] >> (7 - i % 8) & 1 == 1).collect(),
        ))
    }

    pub fn to_hex(&self) -> String {
        self.to_bytes().iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Adds one to the string read as a big-endian binary number.
    /// Returns `false` on overflow.
    fn increment(&mut self) -> bool {
        for bit in self.0.iter_mut().rev() {
            if *bit {
                *bit = false;
            } else {
                *bit = true;
                return true;
            }
        }
        false
    }
}

impl FromIterator<bool> for Bits {
    fn from_iter<I: IntoIterator<Item = bool>>(iter: I) -> Self {
        Self(iter.into_iter().collect())
    }
}

impl std::str::FromStr for Bits {
    type Err = Error;

    /// Parses a string of `0`/`1` characters.
    fn from_str(s: &str) -> Result<Self> {
        s.chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(Error::Parse(format!("bad bit character {other:?}"))),
            })
            .collect()
    }
}

impl fmt::Debug for Bits {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Bits(\"")?;
        for &b in &self.0 {
            write!(f, "{}", u8::from(b))?;
        }
        write!(f, "\")")
    }
}

/// Encoded message for one time step; `b_t` is its length.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Message {
    pub bits: Bits,
}

impl Message {
    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }
}

/// Smallest `l >= 0` with `2^-l <= p`, i.e. `ceil(-log2 p)` computed exactly.
pub fn shannon_length(p: f64) -> u32 {
    debug_assert!(p > 0.0 && p <= 1.0);
    let mut l = (-p.log2()).ceil().max(0.0) as u32;
    while l > 0 && pow2_neg(l - 1) <= p {
        l -= 1;
    }
    while pow2_neg(l) > p {
        l += 1;
    }
    l
}

fn pow2_neg(l: u32) -> f64 {
    0.5f64.powi(l as i32)
}

const NONE: u32 = u32::MAX;

#[derive(Debug, Clone)]
struct Node {
    child: [u32; 2],
    leaf: Option<Symbol>,
}

impl Node {
    fn empty() -> Self {
        Self {
            child: [NONE, NONE],
            leaf: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Codebook {
    codewords: Vec<Option<Bits>>,
    trie: Vec<Node>,
    singleton: Option<Symbol>,
}

impl Codebook {
    /// Builds the canonical Shannon code for the weights in `probs`.
    /// Zero entries are left without a codeword.
    pub fn build(probs: &[f64]) -> Result<Self> {
        let mut support = Vec::new();
        for (i, &p) in probs.iter().enumerate() {
            if !p.is_finite() || !(0.0..=1.0).contains(&p) {
                return Err(Error::Codebook(format!("probability {p} at symbol {i}")));
            }
            if p > 0.0 {
                support.push(i);
            }
        }
        let total: f64 = probs.iter().sum();
        if total > 1.0 + SUM_TOLERANCE {
            return Err(Error::Codebook(format!("probabilities sum to {total}")));
        }
        let mut codewords = vec![None; probs.len()];
        match support.len() {
            0 => return Err(Error::Codebook("no symbol has positive probability".into())),
            1 => {
                codewords[support[0]] = Some(Bits::new());
                return Ok(Self {
                    codewords,
                    trie: vec![Node::empty()],
                    singleton: Some(support[0]),
                });
            }
            _ => {}
        }
        support.sort_by(|&a, &b| probs[b].total_cmp(&probs[a]).then(a.cmp(&b)));

        let mut code = Bits::new();
        let mut first = true;
        for &sym in &support {
            let len = shannon_length(probs[sym]) as usize;
            if first {
                first = false;
            } else if !code.increment() {
                return Err(Error::Codebook("Kraft sum exceeds one".into()));
            }
            debug_assert!(len >= code.len());
            code.0.resize(len, false);
            if len == 0 {
                return Err(Error::Codebook(
                    "zero-length codeword with multiple symbols".into(),
                ));
            }
            codewords[sym] = Some(code.clone());
        }

        let mut book = Self {
            codewords,
            trie: vec![Node::empty()],
            singleton: None,
        };
        for &sym in &support {
            let word = book.codewords[sym].clone().expect("assigned above");
            book.insert(&word, sym)?;
        }
        Ok(book)
    }

    fn insert(&mut self, word: &Bits, sym: Symbol) -> Result<()> {
        let mut node = 0usize;
        for &b in word.as_slice() {
            if self.trie[node].leaf.is_some() {
                return Err(Error::Codebook("codeword has a prefix in the book".into()));
            }
            let slot = self.trie[node].child[usize::from(b)];
            node = if slot == NONE {
                self.trie.push(Node::empty());
                let id = self.trie.len() - 1;
                self.trie[node].child[usize::from(b)] = id as u32;
                id
            } else {
                slot as usize
            };
        }
        let n = &self.trie[node];
        if n.leaf.is_some() || n.child.iter().any(|&c| c != NONE) {
            return Err(Error::Codebook("codeword is a prefix of another".into()));
        }
        self.trie[node].leaf = Some(sym);
        Ok(())
    }

    /// Number of symbols the book was built over (including unsupported).
    pub fn symbols(&self) -> usize {
        self.codewords.len()
    }

    pub fn support(&self) -> impl Iterator<Item = Symbol> + '_ {
        self.codewords
            .iter()
            .enumerate()
            .filter_map(|(i, c)| c.as_ref().map(|_| i))
    }

    pub fn length(&self, sym: Symbol) -> Option<usize> {
        self.codewords.get(sym)?.as_ref().map(Bits::len)
    }

    pub fn codeword(&self, sym: Symbol) -> Option<&Bits> {
        self.codewords.get(sym)?.as_ref()
    }

    pub fn kraft_sum(&self) -> f64 {
        self.codewords
            .iter()
            .flatten()
            .map(|c| pow2_neg(c.len() as u32))
            .sum()
    }

    pub fn encode(&self, sym: Symbol) -> Result<Message> {
        self.codeword(sym)
            .map(|bits| Message { bits: bits.clone() })
            .ok_or(Error::NotInSupport(sym))
    }

    /// Reads one codeword from the front of `bits`; returns the symbol and
    /// the number of bits consumed.
    pub fn decode(&self, bits: &[bool]) -> Result<(Symbol, usize)> {
        if let Some(s) = self.singleton {
            return Ok((s, 0));
        }
        let mut node = 0usize;
        for (i, &b) in bits.iter().enumerate() {
            let next = self.trie[node].child[usize::from(b)];
            if next == NONE {
                return Err(Error::CorruptStream);
            }
            node = next as usize;
            if let Some(sym) = self.trie[node].leaf {
                return Ok((sym, i + 1));
            }
        }
        Err(Error::CorruptStream)
    }
}
