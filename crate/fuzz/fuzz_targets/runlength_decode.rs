#![no_main]

use libfuzzer_sys::fuzz_target;
use masr_core::sparse::{encode_runlength, RunLengthMatrix};

fuzz_target!(|data: &[u8]| {
    let Ok(m) = serde_json::from_slice::<RunLengthMatrix>(data) else { return };
    if let Ok(dense) = m.decode() {
        let again = encode_runlength(&dense, m.step_bits).unwrap();
        assert_eq!(again.decode().unwrap(), dense);
    }
});
