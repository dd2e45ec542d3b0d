#![no_main]

use gridcast::SeriesKind;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(s) = gridcast::ingest::parse_intensity_csv("fuzz", text, SeriesKind::Actual) {
            assert!(s.values().iter().all(|v| *v >= 0.0));
        }
    }
});
