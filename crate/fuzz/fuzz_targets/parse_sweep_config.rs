#![no_main]
use libfuzzer_sys::fuzz_target;

use specplan_core::bench::parse_sweep_config;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(spec) = parse_sweep_config(text) {
        // accepted configs are valid and expand to a baseline row first
        spec.validate().expect("parsed config validates");
        let configs = spec.configs();
        assert!(configs[0].validated().is_ok());
    }
});
