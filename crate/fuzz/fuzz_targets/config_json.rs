#![no_main]

use libfuzzer_sys::fuzz_target;
use occ_core::harness::config::RunConfig;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(cfg) = RunConfig::from_json(text) {
            let echo = serde_json::to_string(&cfg).unwrap();
            assert_eq!(RunConfig::from_json(&echo).unwrap(), cfg);
        }
    }
});
