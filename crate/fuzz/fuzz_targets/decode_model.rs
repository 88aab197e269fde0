#![no_main]

use libfuzzer_sys::fuzz_target;
use masr_core::model::{decode_model, encode_model, MatrixEncoding};

fuzz_target!(|data: &[u8]| {
    if let Ok(net) = decode_model(data) {
        let again = decode_model(&encode_model(&net, MatrixEncoding::Compact)).unwrap();
        assert_eq!(again, net);
    }
});
