#![no_main]

use deceptive_mdp::harness::LayoutSpec;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        let _ = LayoutSpec::parse(text);
    }
});
