#![no_main]

use libfuzzer_sys::fuzz_target;
use masr_core::sim::AcceleratorConfig;

fuzz_target!(|data: &[u8]| {
    let Ok(src) = std::str::from_utf8(data) else { return };
    if let Ok(cfg) = AcceleratorConfig::from_toml_str(src) {
        if cfg.validate().is_ok() {
            let _ = cfg.id();
        }
    }
});
