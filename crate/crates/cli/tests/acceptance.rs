//! End-to-end acceptance checks, one line per criterion. Runs without the
//! libtest harness so every line reaches the test log; exits nonzero if
//! any hard check fails.

use std::collections::HashMap;
use std::time::Instant;

use masr_cli::experiments::scale_point;
use masr_cli::workload::{Workload, WorkloadSpec};
use masr_core::cost::{cost_csr_baseline, cost_masr, masr_footprint, CsrVariant, UnitCosts};
use masr_core::model::{
    dequantize, forward_network, forward_network_predicated, quantize, random_network, refactor_batchnorm,
    select_theta, BatchNormParams, DenseMatrix, FloatDirWeights, FloatLayer, NetworkTrace, RnnNetwork, SyntheticSpec,
    Utterance,
};
use masr_core::sim::{simulate_network, AcceleratorConfig, LoadBalance, Predication, SimResult};
use masr_core::sparse::{
    lnzd, metadata_footprint, prefix_popcount, work_mask, BitMask, CompactMatrix, CompactVector, CsrWidths, Encoding,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    failed: Vec<u8>,
}

impl Outcome {
    fn record(&mut self, n: u8, pass: bool, detail: String) {
        println!("criterion {n:>2}: {}  {detail}", if pass { "PASS" } else { "FAIL" });
        if !pass {
            self.failed.push(n);
        }
    }
}

fn work(m: &CompactMatrix, act: &CompactVector<i16>) -> u64 {
    m.columns()
        .iter()
        .map(|c| c.mask().and(act.mask()).unwrap().count_ones() as u64)
        .sum()
}

/// Sum over every matvec of popcount(weight mask AND activation mask).
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

/// Standard workload plus every simulation run on it so far.
struct Standard {
    w: Workload,
    macs: u64,
    runs: HashMap<String, SimResult>,
    /// Runs whose outputs, MAC count or lane accounting were wrong.
    bad: Vec<String>,
}

impl Standard {
    fn new() -> Self {
        let w = WorkloadSpec::default().load().expect("standard workload");
        let macs = expected_macs(&w.net, &w.utterance, &w.trace);
        Standard { w, macs, runs: HashMap::new(), bad: Vec::new() }
    }

    fn run(&mut self, cfg: &AcceleratorConfig) -> &SimResult {
        let id = cfg.id();
        if !self.runs.contains_key(&id) {
            let t = Instant::now();
            let r = simulate_network(&self.w.net, &self.w.utterance, cfg).expect("standard run");
            eprintln!("  simulated {id} in {:.1}s", t.elapsed().as_secs_f64());
            let exact = matches!(cfg.predication, Predication::Off);
            if r.stats.check_accounting().is_err()
                || (exact && r.stats.mac_count != self.macs)
                || (exact && self.w.trace.layers.iter().zip(&r.layer_outputs).any(|(g, s)| &g.outputs != s))
            {
                self.bad.push(id.clone());
            }
            self.runs.insert(id.clone(), r);
        }
        &self.runs[&id]
    }

    fn util(&mut self, cfg: &AcceleratorConfig) -> f64 {
        self.run(cfg).stats.utilization()
    }
}

fn design(lanes: usize) -> AcceleratorConfig {
    AcceleratorConfig::lanes(lanes).unwrap()
}

fn with(lanes: usize, q: usize, banks: usize, lb: LoadBalance) -> AcceleratorConfig {
    AcceleratorConfig {
        queue_depth: q,
        act_banks: banks,
        load_balance: lb,
        ..design(lanes)
    }
}

fn c1_worked_example(o: &mut Outcome) {
    let t = Instant::now();
    let wm: BitMask = "0011".parse().unwrap();
    let am: BitMask = "1110".parse().unwrap();
    let wk = work_mask(&wm, &am).unwrap();
    let k = lnzd(&wk, 0);
    let addr = k.map(|k| (prefix_popcount(&wm, k), prefix_popcount(&am, k)));
    let pass = wk.to_string() == "0010" && k == Some(2) && addr == Some((0, 2)) && t.elapsed().as_secs_f64() < 1.0;
    o.record(1, pass, format!("work {wk}, lnzd {k:?}, addresses {addr:?}"));
}

/// Criterion 2; returns how many random runs broke MAC conservation or
/// lane accounting, for criterion 3.
fn c2_random_triples(o: &mut Outcome) -> usize {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (mut mismatched, mut miscounted, mut max_lanes, mut modes) = (0, 0, 0, [0usize; 4]);
    for i in 0..200u64 {
        let h = 1usize << rng.gen_range(0..=5);
        let v = 1usize << rng.gen_range(0..=5);
        let p = 1usize << rng.gen_range(0..=h.trailing_zeros());
        let lb = rng.gen_range(0..4);
        modes[lb] += 1;
        max_lanes = max_lanes.max(h * v);
        let cfg = AcceleratorConfig {
            queue_depth: [1, 2, 4, 8][rng.gen_range(0..4)],
            act_banks: [1, 2, 4, 8][rng.gen_range(0..4)],
            load_balance: LoadBalance::ALL[lb],
            ..AcceleratorConfig::topology(h, v, p)
        };
        let layers: Vec<usize> = (0..rng.gen_range(1..=2)).map(|_| rng.gen_range(8..=160)).collect();
        let (net, u) = random_network(
            1000 + i,
            rng.gen_range(8..=160),
            &layers,
            rng.gen_range(0.05..0.6),
            rng.gen_range(0.1..0.9),
            rng.gen_range(2..=5),
            rng.gen_bool(0.7),
        )
        .unwrap();
        let trace = forward_network(&net, &u).unwrap();
        let r = simulate_network(&net, &u, &cfg).unwrap();
        if trace.layers.iter().zip(&r.layer_outputs).any(|(g, s)| &g.outputs != s) {
            mismatched += 1;
        }
        if r.stats.mac_count != expected_macs(&net, &u, &trace) || r.stats.check_accounting().is_err() {
            miscounted += 1;
        }
    }
    o.record(
        2,
        mismatched == 0,
        format!("{mismatched}/200 triples differ from golden (lanes up to {max_lanes}, modes {modes:?})"),
    );
    miscounted
}

fn c4_encodings(o: &mut Outcome) {
    let m = masr_core::model::random_sparse_matrix(4, 800, 800, 0.33, 10).unwrap();
    let parts = [32, 64, 128, 256, 512];
    let fp = |e, p| metadata_footprint(e, &m, p, CsrWidths::default()).unwrap();
    let bm: Vec<u64> = parts.iter().map(|&p| fp(Encoding::Bitmask, p).metadata_bits()).collect();
    let csr: Vec<u64> = parts.iter().map(|&p| fp(Encoding::Csr, p).metadata_bits()).collect();
    let off = |p| fp(Encoding::Csr, p).row_offset_bits;
    let constant = bm.iter().all(|b| *b == bm[0]);
    let eight = off(512) == 8 * off(64);
    let smaller = parts.iter().zip(bm.iter().zip(&csr)).filter(|(p, _)| **p >= 128).all(|(_, (b, c))| b < c);
    o.record(
        4,
        constant && eight && smaller,
        format!("bitmask {bm:?}, csr {csr:?}, offsets 512/64 = {}/{}", off(512), off(64)),
    );
}

fn random_dense(rng: &mut ChaCha8Rng, rows: usize, cols: usize, nz: f64) -> DenseMatrix {
    DenseMatrix::from_fn(rows, cols, |_, _| if rng.gen_bool(nz) { rng.gen_range(-1.0..1.0) } else { 0.0 })
}

fn c5_batchnorm(o: &mut Outcome) {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst: f64 = 0.0;
    let mut ok = true;
    for i in 0..100 {
        let (n, hdim, t) = (rng.gen_range(1..24), rng.gen_range(1..24), rng.gen_range(1..5));
        let dir = |rng: &mut ChaCha8Rng| FloatDirWeights {
            wx: random_dense(rng, n, hdim, 0.5),
            wh: random_dense(rng, hdim, hdim, 0.5),
            bias: (0..hdim).map(|_| rng.gen_range(-0.5..0.5)).collect(),
        };
        let layer = FloatLayer {
            input_dim: n,
            hidden: hdim,
            forward: dir(&mut rng),
            backward: rng.gen_bool(0.5).then(|| dir(&mut rng)),
        };
        let bn = BatchNormParams {
            mu: (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            sigma2: (0..n).map(|_| rng.gen_range(0.05..4.0)).collect(),
            epsilon: 1e-5,
            gamma: (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect(),
            beta: (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        };
        let xs: Vec<Vec<f64>> = (0..t)
            .map(|_| match i % 4 {
                0 => vec![0.0; n],
                1 => (0..n).map(|_| -rng.gen_range(0.01..3.0)).collect(),
                _ => (0..n).map(|_| if rng.gen_bool(0.4) { rng.gen_range(0.0..3.0) } else { 0.0 }).collect(),
            })
            .collect();
        let normed: Vec<Vec<f64>> = xs.iter().map(|x| bn.apply(x)).collect();
        let explicit = layer.forward(&normed).unwrap();
        let folded = refactor_batchnorm(&layer, &bn).unwrap().forward(&xs).unwrap();
        for (a, b) in folded.iter().flatten().zip(explicit.iter().flatten()) {
            let err = (a - b).abs();
            worst = worst.max(err / b.abs().max(1e-300));
            ok &= err <= 1e-5 * b.abs() + 1e-9;
        }
    }
    o.record(5, ok, format!("100 layers incl. zero and all-negative inputs, worst relative error {worst:.2e}"));
}

fn c6_quantization(o: &mut Outcome) {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let (mut checked, mut over, mut worst) = (0u64, 0u64, 0.0f64);
    for _ in 0..20 {
        let (rows, cols, nz) = (rng.gen_range(1..200), rng.gen_range(1..200), rng.gen_range(0.05..1.0));
        let d = random_dense(&mut rng, rows, cols, nz);
        let (m, q) = quantize(&d, 10).unwrap();
        let back = dequantize(&m);
        for (w, r) in d.data().iter().zip(back.data()) {
            let s = if *w >= 0.0 { q.s_pos } else { q.s_neg };
            let bound = s / (2.0 * 511.0);
            let err = (w - r).abs();
            worst = worst.max(if bound > 0.0 { err / bound } else { 0.0 });
            checked += 1;
            if err > bound * (1.0 + 1e-12) {
                over += 1;
            }
        }
    }
    o.record(6, over == 0 && q_is_10bit(), format!("{checked} weights, {over} over bound, worst {worst:.3} of bound"));
}

fn q_is_10bit() -> bool {
    masr_core::model::QuantParams::unit(10).qmax() == 511
}

fn c7_load_balancing(o: &mut Outcome, s: &mut Standard) {
    let vv = s.run(&with(1024, 1, 8, LoadBalance::None)).stats.total_cycles;
    let vlb = s.run(&with(1024, 1, 8, LoadBalance::Vertical)).stats.total_cycles;
    let u_none = s.util(&with(1024, 1, 8, LoadBalance::None));
    let u_h = s.util(&with(1024, 1, 8, LoadBalance::Horizontal));
    let u_v = s.util(&with(1024, 1, 8, LoadBalance::Vertical));
    let speedup = vv as f64 / vlb as f64;
    let pass = speedup >= 1.2 && u_v >= u_h && u_h >= u_none;
    o.record(
        7,
        pass,
        format!("VV+VLB vs VV speedup {speedup:.3} (need >= 1.2); util none {u_none:.3}, HLB {u_h:.3}, VLB {u_v:.3}"),
    );
}

fn c8_utilization(o: &mut Outcome, s: &mut Standard) {
    let lanes = [32, 64, 128, 256, 512, 1024];
    let u: Vec<f64> = lanes.iter().map(|&n| s.util(&with(n, 1, 8, LoadBalance::Vertical))).collect();
    let at = |n| u[lanes.iter().position(|l| *l == n).unwrap()];
    let bands = [(64, 0.90), (256, 0.80), (1024, 0.50)]
        .iter()
        .all(|&(n, target)| (at(n) - target).abs() <= 0.15);
    let monotone = u.windows(2).all(|w| w[1] <= w[0]);
    let shown: Vec<String> = lanes.iter().zip(&u).map(|(n, u)| format!("{n}:{u:.3}")).collect();
    o.record(8, bands && monotone, format!("VV+VLB utilization {}", shown.join(" ")));
}

fn c9_banking(o: &mut Outcome, s: &mut Standard) {
    let b1 = s.run(&with(1024, 1, 1, LoadBalance::None)).stats.breakdown();
    let b8 = s.run(&with(1024, 1, 8, LoadBalance::None)).stats.breakdown();
    let pass = b1.vvadd - b8.vvadd >= 0.20 && b8.mac > b1.mac && (b1.vvadd - 0.35).abs() <= 0.10;
    o.record(
        9,
        pass,
        format!("VVAdd fraction {:.3} -> {:.3}, MAC fraction {:.3} -> {:.3}", b1.vvadd, b8.vvadd, b1.mac, b8.mac),
    );
}

fn c10_queues(o: &mut Outcome, s: &mut Standard) {
    let b: Vec<_> = [1, 2, 4, 8]
        .iter()
        .map(|&q| s.run(&with(1024, q, 8, LoadBalance::None)).stats.breakdown())
        .collect();
    let (first, last) = (b[0], b[3]);
    let closes = s.runs.values().all(|r| r.stats.check_accounting().is_ok());
    let pass = first.stall - last.stall >= 0.10 && last.idle > first.idle && closes;
    o.record(
        10,
        pass,
        format!(
            "stall {:.3} -> {:.3}, idle {:.3} -> {:.3}, accounting closes on {} runs: {closes}",
            first.stall,
            last.stall,
            first.idle,
            last.idle,
            s.runs.len()
        ),
    );
}

fn c11_scaling(o: &mut Outcome) {
    let cfg = masr_cli::experiments::ScaleSpec::default().config;
    let p = |h, nz| scale_point(h, nz, 4, 1, &cfg).unwrap().speedup;
    let (s10, s25, s1k) = (p(3072, 0.10), p(3072, 0.25), p(1024, 0.10));
    let pass = (53.0..=99.0).contains(&s10) && (10.0..=19.0).contains(&s25) && s10 > s1k;
    o.record(
        11,
        pass,
        format!("hidden 3072: {s10:.1}x at 10%, {s25:.1}x at 25%; hidden 1024: {s1k:.1}x at 10%"),
    );
}

fn c12_double_buffering(o: &mut Outcome, s: &mut Standard) {
    // Fastest configuration on the standard workload: the one where weight
    // transfer is hardest to hide. Layer 1 (800 inputs) forward and backward.
    let t = s.w.utterance.timesteps() as f64;
    let r = s.run(&with(1024, 1, 8, LoadBalance::Vertical));
    let layer = &r.passes[2..4];
    let transfer: u64 = layer.iter().map(|p| p.weight_transfer_cycles).sum();
    let compute250: f64 = layer.iter().map(|p| p.compute_cycles as f64).sum::<f64>() / t * 250.0;
    let ratio = transfer as f64 / compute250;

    let long = SyntheticSpec { layers: 2, ..SyntheticSpec::standard(340, 12) };
    let w = WorkloadSpec {
        hidden: long.hidden,
        layers: long.layers,
        timesteps: long.timesteps,
        seed: long.seed,
        ..WorkloadSpec::default()
    }
    .load()
    .unwrap();
    let lr = simulate_network(&w.net, &w.utterance, &with(1024, 1, 8, LoadBalance::Vertical)).unwrap();
    let exposed = lr.stats.weight_load.exposed + lr.stats.act_load.exposed;
    let pass = (ratio - 1.0).abs() <= 0.20 && exposed == 0 && lr.stats.act_load.transfer > 0;
    o.record(
        12,
        pass,
        format!(
            "layer weight transfer {transfer} cycles vs {compute250:.0} compute for 250 steps (ratio {ratio:.2}); \
             340-step run exposed stall {exposed}, streamed act cycles {}",
            lr.stats.act_load.transfer
        ),
    );
}

fn c13_costs(o: &mut Outcome, s: &mut Standard) {
    let costs = UnitCosts::default();
    let density = s.w.act_density();
    let lanes = [32, 64, 128, 256, 512, 1024];
    let mut energy = Vec::new();
    let mut area_ratio = Vec::new();
    let mut energy_ratio = Vec::new();
    for &n in &lanes {
        let cfg = design(n);
        let stats = s.run(&cfg).stats.clone();
        let f = masr_footprint(&s.w.net, &cfg, density).unwrap();
        let d = cost_masr(&stats, &cfg, &f, &costs);
        energy.push(d.total_energy());
        if n >= 128 {
            let base = |v| {
                cost_csr_baseline(&s.w.net, &s.w.utterance, &s.w.trace, n, v, cfg.onchip_act_timesteps, &costs)
                    .unwrap()
                    .cost
            };
            let (eie, ese) = (base(CsrVariant::Eie), base(CsrVariant::Ese));
            let meta = |c: &masr_core::cost::DesignCost| c.area.mask_sram + c.area.row_offset_sram + c.area.act_sram;
            area_ratio.push((n, meta(&eie) / meta(&d)));
            energy_ratio.push((n, ese.total_energy() / d.total_energy()));
        }
    }
    let min = energy.iter().cloned().fold(f64::INFINITY, f64::min);
    let argmin = lanes[energy.iter().position(|e| *e == min).unwrap()];
    let pass = argmin == 256
        && area_ratio.iter().all(|(_, r)| *r >= 2.0)
        && energy_ratio.iter().all(|(_, r)| *r >= 2.5);
    let fmt = |v: &[(usize, f64)]| v.iter().map(|(n, r)| format!("{n}:{r:.2}")).collect::<Vec<_>>().join(" ");
    o.record(
        13,
        pass,
        format!(
            "min-energy design LANESx{argmin}; EIE/MASR metadata+act area {}; ESE/MASR energy {}",
            fmt(&area_ratio),
            fmt(&energy_ratio)
        ),
    );
}

fn c14_predication(o: &mut Outcome, s: &mut Standard) {
    let candidates: Vec<f64> = (0..=24).map(|i| -0.25 * i as f64).collect();
    let theta = select_theta(&s.w.net, &s.w.utterance, &candidates, 0.01).unwrap();
    let (_, ps) = forward_network_predicated(&s.w.net, &s.w.utterance, theta).unwrap();
    let base = s.run(&design(32)).stats.total_cycles;
    let pred = AcceleratorConfig { predication: Predication::Threshold(theta), ..design(32) };
    let cycles = s.run(&pred).stats.total_cycles;
    let reduction = 1.0 - cycles as f64 / base as f64;
    // Soft floor: reported either way; the mismatch bound is hard.
    let hard = ps.mismatch_rate() <= 0.01;
    let soft = reduction >= 0.05;
    println!(
        "criterion 14: {}  theta {theta}, mismatch {:.4}, skipped {:.3} of input columns, cycle reduction {:.1}%{}",
        if hard && soft { "PASS" } else if hard { "PASS (soft floor missed)" } else { "FAIL" },
        ps.mismatch_rate(),
        ps.skip_fraction(),
        100.0 * reduction,
        if soft { "" } else { " (below 5% soft floor)" }
    );
    if !hard {
        o.failed.push(14);
    }
}

fn main() {
    let start = Instant::now();
    let mut o = Outcome { failed: Vec::new() };
    c1_worked_example(&mut o);
    let miscounted = c2_random_triples(&mut o);
    c4_encodings(&mut o);
    c5_batchnorm(&mut o);
    c6_quantization(&mut o);
    let t = Instant::now();
    let mut s = Standard::new();
    eprintln!("  standard workload ready in {:.1}s", t.elapsed().as_secs_f64());
    c7_load_balancing(&mut o, &mut s);
    c8_utilization(&mut o, &mut s);
    c9_banking(&mut o, &mut s);
    c10_queues(&mut o, &mut s);
    c11_scaling(&mut o);
    c12_double_buffering(&mut o, &mut s);
    c13_costs(&mut o, &mut s);
    c14_predication(&mut o, &mut s);
    o.record(
        3,
        miscounted == 0 && s.bad.is_empty(),
        format!(
            "{miscounted}/200 random runs and {}/{} standard runs off the work-mask MAC count {:?}",
            s.bad.len(),
            s.runs.len(),
            s.bad
        ),
    );
    println!("acceptance finished in {:.0}s; failed: {:?}", start.elapsed().as_secs_f64(), o.failed);
    if !o.failed.is_empty() {
        std::process::exit(1);
    }
}
