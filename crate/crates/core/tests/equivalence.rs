use masr_core::model::{forward_network, random_network, NetworkTrace, RnnNetwork, Utterance};
use masr_core::sim::{simulate_network, AcceleratorConfig, LoadBalance};
use masr_core::sparse::{CompactMatrix, CompactVector};
use proptest::prelude::*;

/// Work items of one matvec, counted straight from the masks.
fn work(m: &CompactMatrix, act: &CompactVector<i16>) -> u64 {
    m.columns()
        .iter()
        .map(|c| c.mask().and(act.mask()).unwrap().count_ones() as u64)
        .sum()
}

/// Total MACs a run must execute: for every layer, direction and timestep,
/// the popcount of weight-mask AND activation-mask over both matrices.
fn expected_macs(net: &RnnNetwork, u: &Utterance, trace: &NetworkTrace) -> u64 {
    let mut total = 0;
    let mut inputs = u.inputs.clone();
    for (layer, lt) in net.layers.iter().zip(&trace.layers) {
        let t_len = inputs.len();
        let zero = CompactVector::zeros(layer.hidden);
        for t in 0..t_len {
            let prev = if t == 0 { &zero } else { &lt.forward_hidden[t - 1] };
            total += work(&layer.forward.wh, prev) + work(&layer.forward.wx, &inputs[t]);
        }
        if let (Some(b), Some(bh)) = (&layer.backward, &lt.backward_hidden) {
            for t in 0..t_len {
                let prev = if t + 1 == t_len { &zero } else { &bh[t + 1] };
                total += work(&b.wh, prev) + work(&b.wx, &inputs[t]);
            }
        }
        inputs = lt.outputs.clone();
    }
    total
}

fn config(h: u32, v: u32, p: u32, q: usize, banks: usize, lb: usize) -> AcceleratorConfig {
    let (h, v) = (1usize << h, 1usize << v);
    AcceleratorConfig {
        queue_depth: q,
        act_banks: banks,
        load_balance: LoadBalance::ALL[lb],
        ..AcceleratorConfig::topology(h, v, (1usize << p).min(h))
    }
}

fn check(net: &RnnNetwork, u: &Utterance, cfg: &AcceleratorConfig) {
    let trace = forward_network(net, u).unwrap();
    let r = simulate_network(net, u, cfg).unwrap();
    assert_eq!(r.layer_outputs.len(), trace.layers.len());
    for (i, (s, g)) in r.layer_outputs.iter().zip(&trace.layers).enumerate() {
        assert_eq!(s, &g.outputs, "layer {i} differs on {}", cfg.id());
    }
    assert_eq!(r.stats.mac_count, expected_macs(net, u, &trace), "{}", cfg.id());
    r.stats.check_accounting().unwrap();
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn simulator_matches_golden(
        seed in any::<u64>(),
        input_dim in 1usize..48,
        hidden in prop::collection::vec(1usize..48, 1..3),
        weight_nz in 0.0f64..=1.0,
        input_nz in 0.0f64..=1.0,
        timesteps in 1usize..5,
        bidirectional in any::<bool>(),
        (h, v) in (0u32..=5, 0u32..=5),
        p in 0u32..=5,
        q in prop::sample::select(vec![1usize, 2, 4, 8]),
        banks in prop::sample::select(vec![1usize, 2, 4, 8]),
        lb in 0usize..4,
    ) {
        let (net, u) = random_network(seed, input_dim, &hidden, weight_nz, input_nz, timesteps, bidirectional).unwrap();
        check(&net, &u, &config(h, v, p, q, banks, lb));
    }
}

#[test]
fn balancing_modes_agree_on_outputs_and_work() {
    let (net, u) = random_network(7, 40, &[96, 64], 0.3, 0.5, 6, true).unwrap();
    let mut checksums = Vec::new();
    for lb in 0..4 {
        let cfg = config(3, 3, 1, 2, 2, lb);
        check(&net, &u, &cfg);
        let r = simulate_network(&net, &u, &cfg).unwrap();
        checksums.push((r.layer_outputs, r.stats.mac_count));
    }
    assert!(checksums.windows(2).all(|w| w[0] == w[1]));
}

#[test]
fn all_zero_weights_do_no_work() {
    let (net, u) = random_network(3, 16, &[32], 0.0, 0.5, 3, true).unwrap();
    let cfg = config(2, 2, 1, 1, 1, 3);
    check(&net, &u, &cfg);
    assert_eq!(simulate_network(&net, &u, &cfg).unwrap().stats.mac_count, 0);
}
