#![no_main]
use libfuzzer_sys::fuzz_target;

use specplan_core::search::{read_trace, write_trace};

fuzz_target!(|data: &[u8]| {
    if let Ok(trace) = read_trace(data) {
        let mut out = Vec::new();
        write_trace(&trace, &mut out).unwrap();
        assert_eq!(read_trace(out.as_slice()).unwrap(), trace);
    }
});
