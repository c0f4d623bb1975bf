#![no_main]

use libfuzzer_sys::fuzz_target;
use occ_core::predictor::{Predictor, ScriptedPredictor};

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(s) = ScriptedPredictor::from_jsonl(text, None) {
            let n = s.len();
            let p = Predictor::Scripted(s);
            for t in 0..n.min(8) {
                let d = p.predict(&vec![0; t]);
                assert_eq!(d.len(), p.alphabet_size());
            }
        }
    }
});
