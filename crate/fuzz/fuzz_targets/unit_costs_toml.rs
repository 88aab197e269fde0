#![no_main]

use libfuzzer_sys::fuzz_target;
use masr_core::cost::UnitCosts;

fuzz_target!(|data: &[u8]| {
    let Ok(src) = std::str::from_utf8(data) else { return };
    if let Ok(c) = UnitCosts::from_toml_str(src) {
        let _ = c.validate();
    }
});
