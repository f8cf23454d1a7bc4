#![no_main]
use libfuzzer_sys::fuzz_target;

use specplan_core::parse_map;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    match parse_map(text) {
        Ok(map) => {
            // normalized text must parse back to the same grid
            let again = parse_map(&map.to_movingai()).expect("normalized map parses");
            assert_eq!(again, map);
            assert!(map.blocked_count() <= map.cell_count());
        }
        Err(e) => assert!(e.line() >= 1),
    }
});
