#![no_main]

use libfuzzer_sys::fuzz_target;
use occ_core::predictor::{corpus_from_json, corpus_from_u16le, corpus_to_u16le};

fuzz_target!(|data: &[u8]| {
    if let Ok(symbols) = corpus_from_u16le(data) {
        assert_eq!(corpus_to_u16le(&symbols).unwrap(), data);
    }
    if let Ok(text) = std::str::from_utf8(data) {
        let _ = corpus_from_json(text);
    }
});
