#![no_main]

use deceptive_mdp::harness::parse_trace;
use deceptive_mdp::GridMap;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(trace) = parse_trace(text) else { return };
    let map = GridMap::parse("S...\n.#..\n...1\n0...\n").unwrap();
    let _ = trace.observations(&map);
    let _ = trace.snapshots();
});
