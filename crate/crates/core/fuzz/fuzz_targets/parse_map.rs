#![no_main]

use deceptive_mdp::GridMap;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(map) = GridMap::parse(text) {
        let again = GridMap::parse(&map.to_text()).expect("printed map must parse");
        assert_eq!(again.to_text(), map.to_text());
    }
});
