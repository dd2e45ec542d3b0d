#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(mix) = gridcast::ingest::parse_energy_csv("fuzz", text) {
            assert_eq!(mix.generation().rows(), mix.len());
        }
    }
});
