use masr_core::model::{random_network, RnnNetwork, Utterance};
use masr_core::sim::{simulate_network, simulate_network_with, AcceleratorConfig, SimOptions};

fn workload() -> (RnnNetwork, Utterance) {
    random_network(11, 128, &[256, 256], 0.33, 0.4, 6, true).unwrap()
}

#[test]
fn more_lanes_never_slower() {
    let (net, u) = workload();
    let cycles: Vec<u64> = [32, 64, 128, 256, 512, 1024]
        .iter()
        .map(|&n| simulate_network(&net, &u, &AcceleratorConfig::lanes(n).unwrap()).unwrap().stats.total_cycles)
        .collect();
    assert!(cycles.windows(2).all(|w| w[1] <= w[0]), "{cycles:?}");
}

#[test]
fn vvadd_cycles_follow_bank_count() {
    let (net, u) = workload();
    for banks in [1usize, 2, 4, 8] {
        let cfg = AcceleratorConfig { act_banks: banks, ..AcceleratorConfig::lanes(256).unwrap() };
        let s = simulate_network(&net, &u, &cfg).unwrap().stats;
        // 2 layers x 2 directions x 6 timesteps, 256 units at 6 per bank.
        assert_eq!(s.vvadd_cycles, 24 * 256u64.div_ceil(6 * banks as u64));
    }
}

#[test]
fn deeper_queues_stall_less() {
    let (net, u) = workload();
    let stall = |q| {
        let cfg = AcceleratorConfig { queue_depth: q, ..AcceleratorConfig::lanes(1024).unwrap() };
        let s = simulate_network(&net, &u, &cfg).unwrap().stats;
        s.lanes.iter().map(|l| l.stall).sum::<u64>()
    };
    let s: Vec<u64> = [1, 2, 4, 8].into_iter().map(stall).collect();
    assert!(s.windows(2).all(|w| w[1] <= w[0]), "{s:?}");
}

#[test]
fn dense_mode_executes_every_product() {
    let (net, u) = random_network(5, 20, &[30, 12], 0.3, 0.3, 4, true).unwrap();
    let r = simulate_network_with(&net, &u, &AcceleratorConfig::lanes(32).unwrap(), SimOptions { dense: true }).unwrap();
    // Per direction and timestep: (input + hidden) x hidden products.
    let expect = 2 * 4 * ((20 + 30) * 30 + (30 + 12) * 12);
    assert_eq!(r.stats.mac_count, expect as u64);
}

#[test]
fn first_pass_weights_are_preloaded() {
    let (net, u) = workload();
    let cfg = AcceleratorConfig { dram_bytes_per_cycle: 1e-3, ..AcceleratorConfig::lanes(64).unwrap() };
    let r = simulate_network(&net, &u, &cfg).unwrap();
    assert_eq!(r.passes.len(), 4);
    assert_eq!(r.passes[0].weight_exposed_cycles, 0);
    assert!(r.passes[1..].iter().all(|p| p.weight_exposed_cycles > 0));
    let exposed: u64 = r.passes.iter().map(|p| p.weight_exposed_cycles).sum();
    assert_eq!(r.stats.weight_load.exposed, exposed);
    r.stats.check_accounting().unwrap();
}

#[test]
fn activations_stream_only_past_onchip_window() {
    let (net, u) = random_network(2, 64, &[128], 0.3, 0.4, 12, false).unwrap();
    let cfg = |onchip, bw| AcceleratorConfig {
        onchip_act_timesteps: onchip,
        dram_bytes_per_cycle: bw,
        ..AcceleratorConfig::lanes(32).unwrap()
    };
    let all_onchip = simulate_network(&net, &u, &cfg(12, 25.6)).unwrap();
    assert_eq!(all_onchip.passes[0].act_bytes, 0);
    let streamed = simulate_network(&net, &u, &cfg(4, 25.6)).unwrap();
    assert!(streamed.passes[0].act_bytes > 0);
    assert_eq!(streamed.stats.act_load.exposed, 0);
    assert!(streamed.stats.act_stream_hidden);
    let starved = simulate_network(&net, &u, &cfg(4, 1e-3)).unwrap();
    assert!(starved.stats.act_load.exposed > 0);
    assert!(!starved.stats.act_stream_hidden);
    starved.stats.check_accounting().unwrap();
    assert_eq!(starved.layer_outputs, all_onchip.layer_outputs);
}
