//! Cycle counts worked out by hand for tiny single-lane runs.

use masr_core::model::{DirWeights, QuantParams, RnnLayer};
use masr_core::sim::{AcceleratorConfig, SimOptions, Simulator};
use masr_core::sparse::{lnzd, prefix_popcount, work_mask, BitMask, CompactMatrix};

fn dense_layer(n: usize) -> (RnnLayer, DirWeights) {
    let q = QuantParams::unit(10);
    let codes = vec![1i16; n * n];
    let d = DirWeights {
        wx: CompactMatrix::from_dense_codes(n, n, &codes, q).unwrap(),
        wh: CompactMatrix::from_dense_codes(n, n, &codes, q).unwrap(),
        bias: vec![0.0; n],
    };
    let layer = RnnLayer {
        input_dim: n,
        hidden: n,
        forward: d.clone(),
        backward: None,
        input_quant: q,
        hidden_quant: q,
        output_quant: q,
    };
    (layer, d)
}

#[test]
fn worked_mask_example() {
    let wm: BitMask = "0011".parse().unwrap();
    let am: BitMask = "1110".parse().unwrap();
    let work = work_mask(&wm, &am).unwrap();
    assert_eq!(work.to_string(), "0010");
    let k = lnzd(&work, 0).unwrap();
    assert_eq!(k, 2);
    assert_eq!((prefix_popcount(&wm, k), prefix_popcount(&am, k)), (0, 2));
    assert_eq!(lnzd(&work, k + 1), None);
}

// One lane, queue depth 1, 4x4 all-nonzero weights and activations:
//   cycles 1-5    pipeline fill
//   cycles 6-9    column 0 MACs
//   cycle 10      push column 0 while the first MAC of column 1 issues
//   cycle 11      pop column 0; columns 1..3 repeat the 4-cycle pattern
//   cycle 22      pop column 2, push column 3 (frontend, nothing left)
//   cycle 23      pop column 3, lane idles
// Phase total 23: 16 MAC + 6 frontend + 1 idle.
#[test]
fn dense_phase_on_one_lane() {
    let (layer, d) = dense_layer(4);
    let cfg = AcceleratorConfig::topology(1, 1, 1);
    let mut sim = Simulator::new(&cfg, SimOptions::default()).unwrap();
    sim.simulate_timestep(&layer, &d, &[0; 4], &[1; 4]).unwrap();
    // Zero hidden state: fill, 4 empty columns of one frontend cycle each
    // with pushes overlapped, one more push, the last pop: 11 cycles. Then
    // the 23-cycle input phase and one VVAdd cycle.
    assert_eq!(sim.stats.total_cycles, 11 + 23 + 1);
    assert_eq!(sim.stats.mac_count, 16);

    let mut sim = Simulator::new(&cfg, SimOptions::default()).unwrap();
    sim.simulate_timestep(&layer, &d, &[1; 4], &[1; 4]).unwrap();
    // Two 23-cycle phases and one VVAdd cycle (4 units, 6 per cycle).
    assert_eq!(sim.stats.total_cycles, 47);
    assert_eq!(sim.stats.mac_count, 32);
    assert_eq!(sim.stats.vvadd_cycles, 1);
    let l = sim.stats.lanes[0];
    assert_eq!((l.mac_busy, l.frontend, l.idle, l.stall), (32, 12, 3, 0));
    sim.stats.check_accounting().unwrap();
}
