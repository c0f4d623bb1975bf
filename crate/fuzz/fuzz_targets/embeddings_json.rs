#![no_main]

use libfuzzer_sys::fuzz_target;
use occ_core::DistortionMeasure;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(m) = DistortionMeasure::cosine_from_json(text) {
            let n = m.size().unwrap_or(0);
            for x in 0..n.min(16) {
                for y in 0..n.min(16) {
                    let d = m.eval(x, y);
                    assert!((0.0..=m.d_max()).contains(&d));
                }
            }
        }
    }
});
