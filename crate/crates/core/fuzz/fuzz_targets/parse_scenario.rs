#![no_main]

use std::path::Path;

use deceptive_mdp::harness::Scenario;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        let _ = Scenario::parse(text, Path::new("/nonexistent"));
    }
});
