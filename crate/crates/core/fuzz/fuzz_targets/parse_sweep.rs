#![no_main]

use std::path::Path;

use deceptive_mdp::harness::SweepSpec;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        let _ = SweepSpec::parse(text, Path::new("/nonexistent"));
    }
});
