#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(table) = gridcast::ingest::parse_emission_factors(text) {
            assert!(table.iter().all(|(_, f)| f >= 0.0));
        }
    }
});
