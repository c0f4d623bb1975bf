#![no_main]

use libfuzzer_sys::fuzz_target;
use occ_core::channel::{Channel, ChannelSpec};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(spec) = ChannelSpec::parse(text) else {
        return;
    };
    if let Ok(mut ch) = Channel::new(spec, 0) {
        for t in 1..=32 {
            if ch.erasure(t).is_err() {
                break;
            }
        }
    }
});
