#![no_main]

use libfuzzer_sys::fuzz_target;
use masr_core::sparse::{lnzd, prefix_popcount, BitMask};

fuzz_target!(|data: &[u8]| {
    if data.len() < 2 {
        return;
    }
    let len = u16::from_le_bytes([data[0], data[1]]) as usize;
    let words: Vec<u64> = data[2..]
        .chunks_exact(8)
        .map(|c| u64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let Ok(m) = BitMask::from_words(len, words) else { return };
    let ones: Vec<usize> = (0..len).filter(|&i| m.get(i)).collect();
    assert_eq!(m.count_ones(), ones.len());
    assert_eq!(prefix_popcount(&m, len), ones.len());
    assert_eq!(lnzd(&m, 0), ones.first().copied());
});
