#![no_main]
use libfuzzer_sys::fuzz_target;

use specplan_core::scen::parse_scen;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Err(e) = parse_scen(text) {
        assert!(e.line >= 1 && e.line <= text.lines().count().max(1));
    }
});
