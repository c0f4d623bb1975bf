#![no_main]

use libfuzzer_sys::fuzz_target;
use occ_core::harness::episode::Aggregates;
use occ_core::harness::trace::{read_steps, write_steps};

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(steps) = read_steps(text) {
            let _ = Aggregates::from_steps(&steps);
            let mut buf = Vec::new();
            write_steps(&mut buf, &steps).unwrap();
            assert_eq!(
                read_steps(std::str::from_utf8(&buf).unwrap()).unwrap().len(),
                steps.len()
            );
        }
    }
});
