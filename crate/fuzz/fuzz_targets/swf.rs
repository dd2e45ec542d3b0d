#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(trace) = gridcast::ingest::parse_swf(text) {
            assert!(trace.jobs.iter().all(|j| j.runtime_h >= 1));
        }
    }
});
