#![no_main]

use libfuzzer_sys::fuzz_target;
use masr_core::sparse::{encode_csr, CsrMatrix};

fuzz_target!(|data: &[u8]| {
    let Ok(m) = serde_json::from_slice::<CsrMatrix>(data) else { return };
    if let Ok(dense) = m.decode() {
        let parts = m.partitions.len().max(1);
        // More partitions than columns is a valid decode but not an encode.
        if let Ok(again) = encode_csr(&dense, parts, m.widths) {
            assert_eq!(again.decode().unwrap(), dense);
        }
    }
});
