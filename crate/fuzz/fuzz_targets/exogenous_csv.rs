#![no_main]

use libfuzzer_sys::fuzz_target;

// The input is split at the first NUL byte into the weather and demand files.
fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let (weather, demand) = text.split_once('\0').unwrap_or((text, ""));
    if let Ok(frame) = gridcast::ingest::parse_exogenous_csv(weather, demand) {
        assert_eq!(frame.values().rows(), frame.len());
    }
});
