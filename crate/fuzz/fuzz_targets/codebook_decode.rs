#![no_main]

use libfuzzer_sys::fuzz_target;
use occ_core::coder::{Bits, Codebook};

// First byte: alphabet size; next `n` bytes: weights; rest: the bit stream.
fuzz_target!(|data: &[u8]| {
    let Some((&n, rest)) = data.split_first() else {
        return;
    };
    let n = usize::from(n).max(1);
    if rest.len() < n {
        return;
    }
    let (weights, stream) = rest.split_at(n);
    let total: f64 = weights.iter().map(|&w| f64::from(w)).sum();
    if total == 0.0 {
        return;
    }
    let probs: Vec<f64> = weights.iter().map(|&w| f64::from(w) / total).collect();
    let Ok(book) = Codebook::build(&probs) else {
        return;
    };
    let Ok(bits) = Bits::from_bytes(stream, stream.len() * 8) else {
        return;
    };
    let bits = bits.as_slice();
    let mut pos = 0;
    while pos < bits.len() {
        match book.decode(&bits[pos..]) {
            Ok((sym, 0)) => {
                assert!(probs[sym] > 0.0);
                break;
            }
            Ok((sym, used)) => {
                assert_eq!(
                    book.codeword(sym).map(|c| c.as_slice()),
                    Some(&bits[pos..pos + used])
                );
                pos += used;
            }
            Err(_) => break,
        }
    }
});
