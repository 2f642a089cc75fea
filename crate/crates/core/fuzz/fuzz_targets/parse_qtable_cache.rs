#![no_main]

use deceptive_mdp::{GridMap, Mdp, QTable};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let map = GridMap::parse("S..\n.#.\n0.1\n").unwrap();
    let mdp = Mdp::new(map, 0, 1.0).unwrap();
    let _ = QTable::from_cache_str(text, &mdp);
});
