use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::config::{AcceleratorConfig, Derived};
use super::engine::{Engine, PhaseInput};
use super::partition::{check_capacity, LaneAssignment};
use super::stats::SimStats;
use crate::error::Result;
use crate::model::{output_neuron, vvadd_neuron, DirWeights, RnnLayer, RnnNetwork, Utterance};
use crate::sparse::{CompactMatrix, CompactVector};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimOptions {
    /// Treat every weight and activation as nonzero: the same schedule a
    /// dense engine would run, used as the baseline for sparsity speedups.
    pub dense: bool,
}

/// Timing of one (layer, direction) pass and its off-chip traffic.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PassTiming {
    pub layer: usize,
    pub backward: bool,
    pub compute_cycles: u64,
    pub weight_bytes: u64,
    pub weight_transfer_cycles: u64,
    pub weight_exposed_cycles: u64,
    pub act_bytes: u64,
    pub act_transfer_cycles: u64,
    pub act_exposed_cycles: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimResult {
    /// `y^t` of every layer.
    pub layer_outputs: Vec<Vec<CompactVector<i16>>>,
    pub stats: SimStats,
    pub passes: Vec<PassTiming>,
}

impl SimResult {
    pub fn outputs(&self) -> &[CompactVector<i16>] {
        self.layer_outputs.last().map_or(&[], |v| v.as_slice())
    }
}

struct Tiling {
    assign: LaneAssignment,
    rows: Vec<u16>,
    cols: Vec<u16>,
}

/// Stateful simulator for one configuration; statistics accumulate over
/// every timestep it runs.
pub struct Simulator {
    cfg: AcceleratorConfig,
    derived: Derived,
    engine: Engine,
    tilings: HashMap<(usize, usize), Tiling>,
    pub stats: SimStats,
}

fn ceil_div_f(bytes: u64, per_cycle: f64) -> u64 {
    (bytes as f64 / per_cycle).ceil() as u64
}

/// Bytes of one compact vector: payload plus mask.
pub fn compact_bytes(nnz: usize, dim: usize, bits: u32) -> u64 {
    (nnz as u64 * bits as u64 + dim as u64).div_ceil(8)
}

/// Bytes of one direction's matrices: payload plus masks.
pub fn direction_bytes(d: &DirWeights) -> u64 {
    [&d.wx, &d.wh]
        .iter()
        .map(|m| compact_bytes(m.nnz(), m.rows() * m.cols(), m.quant().bits))
        .sum()
}

impl Simulator {
    pub fn new(cfg: &AcceleratorConfig, opts: SimOptions) -> Result<Self> {
        let derived = cfg.validate()?;
        Ok(Simulator {
            cfg: cfg.clone(),
            derived,
            engine: Engine::new(cfg, &derived, opts.dense),
            tilings: HashMap::new(),
            stats: SimStats::new(derived.total_lanes),
        })
    }

    pub fn config(&self) -> &AcceleratorConfig {
        &self.cfg
    }

    pub fn derived(&self) -> &Derived {
        &self.derived
    }

    fn phase(&mut self, w: &CompactMatrix, act: &[i16], skip: Option<&[bool]>) -> Result<Vec<crate::model::SignSplitAcc>> {
        let cfg = &self.cfg;
        let t = self.tilings.entry((w.rows(), w.cols())).or_insert_with(|| {
            let assign = LaneAssignment::new(w.rows(), w.cols(), cfg);
            let rows = assign.slice_of_rows();
            let cols = assign.slice_of_cols();
            Tiling { assign, rows, cols }
        });
        let act_compact = CompactVector::encode(act);
        let input = PhaseInput {
            w,
            act,
            act_compact: &act_compact,
            skip,
            assign: &t.assign,
            row_slice: &t.rows,
            col_slice: &t.cols,
        };
        let (accs, _) = self.engine.run_phase(&input, &mut self.stats)?;
        Ok(accs)
    }

    /// One timestep of one direction: hidden matvec, input matvec (with
    /// predication skips), then VVAdd. Returns the new hidden codes.
    pub fn simulate_timestep(&mut self, layer: &RnnLayer, d: &DirWeights, h_prev: &[i16], x: &[i16]) -> Result<Vec<i16>> {
        let theta = self.cfg.predication.theta();
        let hid_acc = self.phase(&d.wh, h_prev, None)?;
        let hid: Vec<f64> = hid_acc.iter().map(|a| a.combine(d.wh.quant(), &layer.hidden_quant)).collect();
        let skip: Vec<bool> = hid.iter().map(|v| *v < theta).collect();
        let skipped = skip.iter().filter(|s| **s).count();
        self.stats.skipped_columns += skipped as u64;
        let inp_acc = self.phase(&d.wx, x, (skipped > 0).then_some(skip.as_slice()))?;

        let h: Vec<i16> = (0..layer.hidden)
            .map(|j| {
                if skip[j] {
                    0
                } else {
                    let inp = inp_acc[j].combine(d.wx.quant(), &layer.input_quant);
                    vvadd_neuron(hid[j], inp, d.bias[j], &layer.hidden_quant)
                }
            })
            .collect();

        let vv = layer.hidden.div_ceil(self.derived.vvadd_width) as u64;
        self.stats.vvadd_cycles += vv;
        self.stats.add_global_idle(vv);
        let per_word = (self.cfg.act_word_bits / self.cfg.weight_word_bits) as usize;
        let nnz = |v: &[i16]| v.iter().filter(|a| **a != 0).count();
        let pes = self.cfg.horiz_pes as u64;
        let (nx, nh, nnew) = (nnz(x), nnz(h_prev), nnz(&h));
        self.stats.sram_reads.act += (nx.div_ceil(per_word) + nh.div_ceil(per_word)) as u64 * pes;
        self.stats.sram_reads.act_mask += 2 * self.derived.total_pes as u64;
        self.stats.regfile_writes += (nx + nh) as u64 * pes;
        self.stats.act_sram_writes += nnew.div_ceil(per_word) as u64;
        self.stats.timesteps += 1;
        Ok(h)
    }
}

/// Simulates every layer, forward pass then backward pass, with weight and
/// activation double buffering charged analytically afterwards.
pub fn simulate_network(net: &RnnNetwork, u: &Utterance, cfg: &AcceleratorConfig) -> Result<SimResult> {
    simulate_network_with(net, u, cfg, SimOptions::default())
}

pub fn simulate_network_with(net: &RnnNetwork, u: &Utterance, cfg: &AcceleratorConfig, opts: SimOptions) -> Result<SimResult> {
    net.validate()?;
    check_capacity(net, cfg)?;
    let mut sim = Simulator::new(cfg, opts)?;
    let bw = cfg.dram_bytes_per_cycle;
    let mut passes = Vec::new();
    let mut layer_outputs = Vec::with_capacity(net.layers.len());
    let mut inputs: Vec<CompactVector<i16>> = u.inputs.clone();
    for (li, layer) in net.layers.iter().enumerate() {
        let xs: Vec<Vec<i16>> = inputs.iter().map(CompactVector::decode).collect();
        let t_len = xs.len();
        let mut states: Vec<Vec<Vec<i16>>> = Vec::new();
        for (di, d) in layer.directions().enumerate() {
            let backward = di == 1;
            let start = sim.stats.total_cycles;
            let mut h = vec![0i16; layer.hidden];
            let mut out = vec![Vec::new(); t_len];
            let mut step_cycles = Vec::with_capacity(t_len);
            for s in 0..t_len {
                let t = if backward { t_len - 1 - s } else { s };
                let before = sim.stats.total_cycles;
                h = sim.simulate_timestep(layer, d, &h, &xs[t])?;
                step_cycles.push(sim.stats.total_cycles - before);
                out[t] = h.clone();
            }
            let weight_bytes = direction_bytes(d);
            let mut act = (0u64, 0u64, 0u64);
            for s in cfg.onchip_act_timesteps..t_len {
                let t = if backward { t_len - 1 - s } else { s };
                let bytes = compact_bytes(inputs[t].nnz(), inputs[t].dim(), layer.input_quant.bits);
                let cycles = ceil_div_f(bytes, bw);
                let hide = step_cycles[s - 1];
                if cycles >= hide {
                    sim.stats.act_stream_hidden = false;
                }
                act.0 += bytes;
                act.1 += cycles;
                act.2 += cycles.saturating_sub(hide);
            }
            passes.push(PassTiming {
                layer: li,
                backward,
                compute_cycles: sim.stats.total_cycles - start,
                weight_bytes,
                weight_transfer_cycles: ceil_div_f(weight_bytes, bw),
                weight_exposed_cycles: 0,
                act_bytes: act.0,
                act_transfer_cycles: act.1,
                act_exposed_cycles: act.2,
            });
            states.push(out);
        }
        let outputs: Vec<CompactVector<i16>> = (0..t_len)
            .map(|t| {
                let y: Vec<i16> = (0..layer.hidden)
                    .map(|j| {
                        output_neuron(
                            states[0][t][j],
                            states.get(1).map(|g| g[t][j]),
                            &layer.hidden_quant,
                            &layer.output_quant,
                        )
                    })
                    .collect();
                CompactVector::encode(&y)
            })
            .collect();
        inputs = outputs.clone();
        layer_outputs.push(outputs);
    }

    // The first pass's weights are resident before the run starts; every
    // later pass loads while its predecessor computes.
    for i in 1..passes.len() {
        let prev = passes[i - 1].compute_cycles;
        passes[i].weight_exposed_cycles = passes[i].weight_transfer_cycles.saturating_sub(prev);
    }
    let mut stats = sim.stats;
    for p in &passes {
        stats.weight_load.transfer += p.weight_transfer_cycles;
        stats.weight_load.exposed += p.weight_exposed_cycles;
        stats.act_load.transfer += p.act_transfer_cycles;
        stats.act_load.exposed += p.act_exposed_cycles;
        stats.dram_bytes += p.weight_bytes + p.act_bytes;
    }
    let exposed = stats.weight_load.exposed + stats.act_load.exposed;
    stats.add_global_idle(exposed);
    stats.check_accounting()?;
    Ok(SimResult {
        layer_outputs,
        stats,
        passes,
    })
}
