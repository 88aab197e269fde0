use masr_core::model::{decode_model, encode_model, random_network, random_sparse_matrix, MatrixEncoding, QuantParams};
use masr_core::sparse::{
    encode_csr, encode_runlength, lnzd, metadata_footprint, prefix_popcount, work_mask, BitMask, CompactVector,
    CsrWidths, Encoding,
};
use proptest::prelude::*;

fn mask_strategy() -> impl Strategy<Value = Vec<bool>> {
    prop::collection::vec(any::<bool>(), 0..200)
}

proptest! {
    #[test]
    fn lnzd_and_prefix_popcount_match_linear_scan(bits in mask_strategy(), start in 0usize..220) {
        let m = BitMask::from_bools(bits.iter().copied());
        let start = start.min(bits.len());
        let expect = bits.iter().enumerate().skip(start).find(|(_, b)| **b).map(|(i, _)| i);
        prop_assert_eq!(lnzd(&m, start), expect);
        prop_assert_eq!(prefix_popcount(&m, start), bits[..start].iter().filter(|b| **b).count());
    }

    #[test]
    fn work_mask_is_elementwise_and(pair in (0usize..200).prop_flat_map(|n| {
        (prop::collection::vec(any::<bool>(), n), prop::collection::vec(any::<bool>(), n))
    })) {
        let (a, b) = pair;
        let w = work_mask(&BitMask::from_bools(a.iter().copied()), &BitMask::from_bools(b.iter().copied())).unwrap();
        for i in 0..a.len() {
            prop_assert_eq!(w.get(i), a[i] && b[i]);
        }
        prop_assert_eq!(w.count_ones(), a.iter().zip(&b).filter(|(x, y)| **x && **y).count());
    }

    #[test]
    fn compact_vector_roundtrip(v in prop::collection::vec(-3i16..=3, 0..150)) {
        let c = CompactVector::encode(&v);
        prop_assert_eq!(c.nnz(), v.iter().filter(|x| **x != 0).count());
        prop_assert!(c.values().iter().all(|x| *x != 0));
        prop_assert_eq!(c.decode(), v);
    }

    #[test]
    fn csr_and_runlength_roundtrip(
        seed in any::<u64>(),
        rows in 1usize..80,
        cols in 1usize..80,
        nz in 0.0f64..=1.0,
        parts in 1usize..40,
        step_bits in 1u32..6,
    ) {
        let m = random_sparse_matrix(seed, rows, cols, nz, 10).unwrap();
        let csr = encode_csr(&m, parts, CsrWidths::default()).unwrap();
        prop_assert_eq!(csr.decode().unwrap(), m.clone());
        let rl = encode_runlength(&m, step_bits).unwrap();
        prop_assert_eq!(rl.decode().unwrap(), m.clone());
        // Bitmask metadata is one bit per element at any partition count.
        let f = metadata_footprint(Encoding::Bitmask, &m, parts, CsrWidths::default()).unwrap();
        prop_assert_eq!(f.metadata_bits(), (rows * cols) as u64);
        prop_assert_eq!(f.value_bits, m.nnz() as u64 * 10);
    }

    #[test]
    fn quantization_error_is_bounded(bits in 2u32..=12, s_pos in 0.01f64..10.0, s_neg in 0.01f64..10.0, x in -1.0f64..=1.0) {
        let q = QuantParams::new(bits, s_pos, s_neg).unwrap();
        let v = if x >= 0.0 { x * s_pos } else { x * s_neg };
        let back = q.decode(q.encode(v));
        let s = if x >= 0.0 { s_pos } else { s_neg };
        prop_assert!((back - v).abs() <= s / (2.0 * q.qmax() as f64) * (1.0 + 1e-12));
    }

    #[test]
    fn model_file_roundtrip(seed in any::<u64>(), hidden in prop::collection::vec(1usize..24, 1..3), bi in any::<bool>()) {
        let (net, _) = random_network(seed, 8, &hidden, 0.4, 0.5, 1, bi).unwrap();
        for enc in [MatrixEncoding::DenseCodes, MatrixEncoding::Compact] {
            let back = decode_model(&encode_model(&net, enc)).unwrap();
            prop_assert_eq!(&back, &net);
        }
    }

    #[test]
    fn truncated_model_is_rejected(seed in any::<u64>(), cut in 0.0f64..1.0) {
        let (net, _) = random_network(seed, 6, &[10], 0.5, 0.5, 1, true).unwrap();
        let bytes = encode_model(&net, MatrixEncoding::Compact);
        let n = ((bytes.len() as f64) * cut) as usize;
        prop_assert!(decode_model(&bytes[..n]).is_err());
    }
}

#[test]
fn csr_offsets_grow_linearly_with_partitions() {
    let m = random_sparse_matrix(1, 800, 800, 0.33, 10).unwrap();
    let at = |p| metadata_footprint(Encoding::Csr, &m, p, CsrWidths::default()).unwrap().row_offset_bits;
    assert_eq!(at(512), 8 * at(64));
    assert_eq!(at(256), 2 * at(128));
}
