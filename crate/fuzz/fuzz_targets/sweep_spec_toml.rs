#![no_main]

use libfuzzer_sys::fuzz_target;
use masr_cli::sweep::SweepSpec;

fuzz_target!(|data: &[u8]| {
    // The product of the lists grows quickly; small inputs cover the parser.
    if data.len() > 2048 {
        return;
    }
    let Ok(src) = std::str::from_utf8(data) else { return };
    if let Ok(spec) = SweepSpec::from_toml_str(src) {
        if let Ok(cfgs) = spec.configs() {
            assert!(cfgs.windows(2).all(|w| w[0].id() < w[1].id()));
        }
    }
});
