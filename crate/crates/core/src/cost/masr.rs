use serde::{Deserialize, Serialize};

use super::{Breakdown, DesignCost, UnitCosts};
use crate::error::{Error, Result};
use crate::model::RnnNetwork;
use crate::sim::{max_lane_footprint, AcceleratorConfig, SimStats};

/// Bits of each partial-sum queue entry: four 32-bit sign-split sums.
const QUEUE_ENTRY_BITS: u64 = 128;
/// Address, value and control flops of one lane's pipeline.
const PIPELINE_BITS: u64 = 64;

/// Storage the accelerator is provisioned with.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MasrFootprint {
    pub lanes: usize,
    pub pes: usize,
    pub act_banks: usize,
    pub weight_bits_per_lane: u64,
    pub mask_bits_per_lane: u64,
    /// Widest vertical slice; the width of one mask register and one mask
    /// read.
    pub rows_per_lane: u64,
    pub act_value_bits: u64,
    pub act_mask_bits: u64,
    /// Weight, activation and work mask registers of every lane.
    pub mask_register_bits: u64,
    pub queue_register_bits: u64,
    pub act_regfile_bits: u64,
    pub pipeline_register_bits: u64,
}

impl MasrFootprint {
    pub fn register_bits(&self) -> u64 {
        self.mask_register_bits + self.queue_register_bits + self.act_regfile_bits + self.pipeline_register_bits
    }

    pub fn sram_bits(&self) -> (u64, u64, u64) {
        let l = self.lanes as u64;
        (
            self.weight_bits_per_lane * l,
            self.mask_bits_per_lane * l,
            self.act_value_bits + self.act_mask_bits,
        )
    }
}

/// Sizes every on-chip structure for `net` on `cfg`. Lane SRAMs hold both
/// directions of the largest layer (one direction computes while the other
/// is double buffered). The activation SRAM holds the on-chip window of a
/// layer's inputs and hidden states, compressed at `act_density`.
/// Configured capacities override the derived sizes.
pub fn masr_footprint(net: &RnnNetwork, cfg: &AcceleratorConfig, act_density: f64) -> Result<MasrFootprint> {
    if !(0.0..=1.0).contains(&act_density) {
        return Err(Error::param(format!("act_density = {act_density} must be in [0, 1]")));
    }
    let derived = cfg.validate()?;
    let lane = max_lane_footprint(net, cfg);
    let caps = &cfg.capacities;
    let weight_bits = caps.weight_bytes_per_lane.map_or(lane.value_bits + lane.dup_value_bits, |b| b * 8);
    let mask_bits = caps.mask_bytes_per_lane.map_or(lane.mask_bits + lane.dup_mask_bits, |b| b * 8);
    let rows_per_lane = net
        .layers
        .iter()
        .map(|l| l.input_dim.max(l.hidden).div_ceil(cfg.vert_lanes) as u64)
        .max()
        .unwrap_or(0);

    let elems = net
        .layers
        .iter()
        .map(|l| (l.input_dim + l.hidden) as u64)
        .max()
        .unwrap_or(0)
        * cfg.onchip_act_timesteps as u64;
    let value_bits = net.layers.iter().map(|l| l.hidden_quant.bits.max(l.input_quant.bits)).max().unwrap_or(0) as u64;
    let (act_value_bits, act_mask_bits) = match caps.act_bytes {
        Some(b) => {
            // Keep the derived mask-to-value proportion.
            let v = (elems as f64 * act_density * value_bits as f64).ceil();
            let m = elems as f64;
            let total = (b * 8) as f64;
            let mask = (total * m / (m + v)).round() as u64;
            (b * 8 - mask, mask)
        }
        None => ((elems as f64 * act_density * value_bits as f64).ceil() as u64, elems),
    };

    let lanes = derived.total_lanes as u64;
    Ok(MasrFootprint {
        lanes: derived.total_lanes,
        pes: derived.total_pes,
        act_banks: cfg.act_banks,
        weight_bits_per_lane: weight_bits,
        mask_bits_per_lane: mask_bits,
        rows_per_lane,
        act_value_bits,
        act_mask_bits,
        mask_register_bits: 3 * rows_per_lane * lanes,
        queue_register_bits: cfg.queue_depth as u64 * QUEUE_ENTRY_BITS * lanes,
        act_regfile_bits: (derived.act_regfile_words as u64 * cfg.weight_word_bits as u64 + rows_per_lane)
            * derived.total_pes as u64,
        pipeline_register_bits: PIPELINE_BITS * lanes,
    })
}

/// Prices one completed run. Dynamic energy is access count times unit
/// cost; static energy is SRAM leakage plus register clocking over the run.
pub fn cost_masr(stats: &SimStats, cfg: &AcceleratorConfig, f: &MasrFootprint, c: &UnitCosts) -> DesignCost {
    let banks = f.act_banks.max(1) as u64;
    let act_bank_bits = f.act_value_bits.div_ceil(banks);
    let act_mask_bank_bits = f.act_mask_bits.div_ceil(banks);
    let cycles = stats.total_cycles as f64;
    let (w_bits, m_bits, a_bits) = f.sram_bits();
    let leak = |bits: u64| bits as f64 * cycles * c.leakage_per_bit_per_cycle;
    let reg_bits = f.register_bits();

    let area = Breakdown {
        weight_sram: c.sram_arrays(f.lanes, f.weight_bits_per_lane),
        mask_sram: c.sram_arrays(f.lanes, f.mask_bits_per_lane) + c.sram_arrays(f.act_banks, act_mask_bank_bits),
        act_sram: c.sram_arrays(f.act_banks, act_bank_bits),
        row_offset_sram: 0.0,
        registers: reg_bits as f64 * c.register_bit_area,
        logic: f.lanes as f64 * c.lane_logic_area + vvadd_adders(cfg) as f64 * c.adder_area,
        dram: 0.0,
    };

    let reads = &stats.sram_reads;
    let reg_static = reg_bits as f64 * cycles * c.register_bit_energy_per_cycle;
    let static_energy = leak(w_bits) + leak(m_bits) + leak(a_bits) + reg_static;
    let vvadd_elems = stats.vvadd_cycles as f64 * vvadd_adders(cfg) as f64;
    let energy = Breakdown {
        weight_sram: reads.weight as f64 * c.sram_read(f.weight_bits_per_lane, cfg.weight_word_bits as u64)
            + leak(w_bits),
        mask_sram: reads.weight_mask as f64 * c.sram_read(f.mask_bits_per_lane, f.rows_per_lane)
            + reads.act_mask as f64 * c.sram_read(act_mask_bank_bits, f.rows_per_lane)
            + leak(m_bits)
            + leak(f.act_mask_bits),
        act_sram: (reads.act + stats.act_sram_writes) as f64 * c.sram_read(act_bank_bits, cfg.act_word_bits as u64)
            + leak(f.act_value_bits),
        row_offset_sram: 0.0,
        registers: (stats.regfile_reads + stats.regfile_writes + stats.queue_pushes + stats.queue_pops) as f64
            * c.regfile_access_energy
            + reg_static,
        // Each popped partial sum is four 32-bit adds into its column total.
        logic: stats.mac_count as f64 * c.mac_energy
            + stats.queue_pops as f64 * 4.0 * c.add_energy
            + vvadd_elems * c.vvadd_energy,
        dram: stats.dram_bytes as f64 * c.dram_energy_per_byte,
    };
    DesignCost {
        name: format!("LANESx{}", f.lanes),
        cycles: stats.total_cycles,
        area,
        energy,
        static_energy,
    }
}

fn vvadd_adders(cfg: &AcceleratorConfig) -> usize {
    cfg.validate().map_or(0, |d| d.vvadd_width)
}
