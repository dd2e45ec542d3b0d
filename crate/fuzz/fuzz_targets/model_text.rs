#![no_main]

use gridcast::SarimaxModel;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(models) = SarimaxModel::parse_text(text) {
            for (label, m) in &models {
                SarimaxModel::parse_text(&m.to_text(label)).expect("rendered model parses");
            }
        }
    }
});
