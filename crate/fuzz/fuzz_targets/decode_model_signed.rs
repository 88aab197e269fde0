#![no_main]

// The checksum rejects almost every mutation, so this target appends a
// valid digest to reach the layer parser.
use libfuzzer_sys::fuzz_target;
use masr_core::model::decode_model;
use sha2::{Digest, Sha256};

fuzz_target!(|body: &[u8]| {
    let mut bytes = body.to_vec();
    bytes.extend_from_slice(&Sha256::digest(body));
    let _ = decode_model(&bytes);
});
