//! CSR baselines priced with the same unit costs as the accelerator.
//!
//! Access model, per matrix-vector product on `P` PEs, each owning a slice
//! of output columns with its own row-offset array:
//! - a processed input row costs every PE two row-offset reads, then one
//!   value read, one column-step read and one MAC per stored entry
//!   (padding entries included);
//! - EIE processes only rows whose activation is nonzero, ESE processes
//!   every row;
//! - activations are stored and read densely;
//! - a PE spends `max(1, entries)` cycles per processed row and the product
//!   ends when the slowest PE does.

use serde::{Deserialize, Serialize};

use super::{Breakdown, DesignCost, UnitCosts};
use crate::error::{Error, Result};
use crate::model::{NetworkTrace, RnnNetwork, Utterance};
use crate::sparse::{encode_csr, CompactMatrix, CompactVector, CsrWidths};

/// Activation queue (8 entries of value and index), pointer and pipeline
/// registers of one PE.
const PE_REGISTER_BITS: u64 = 8 * 20 + 64;
const ACCUMULATOR_BITS: u64 = 32;
const FILL_CYCLES: u64 = 5;
const VVADD_WIDTH: u64 = 6;
const ACT_WORD_BITS: u64 = 60;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CsrVariant {
    /// Skips rows whose activation is zero.
    Eie,
    /// Exploits weight sparsity only.
    Ese,
}

impl CsrVariant {
    pub fn name(self) -> &'static str {
        match self {
            CsrVariant::Eie => "EIE",
            CsrVariant::Ese => "ESE",
        }
    }
}

/// Priced baseline plus the access counts behind it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CsrBaseline {
    pub cost: DesignCost,
    pub macs: u64,
    pub row_offset_reads: u64,
    pub entry_reads: u64,
    pub act_reads: u64,
    pub act_writes: u64,
    pub dram_bytes: u64,
    /// Per-PE array sizes in bits: values, column steps, row offsets.
    pub value_bits_per_pe: u64,
    pub step_bits_per_pe: u64,
    pub offset_bits_per_pe: u64,
    pub act_sram_bits: u64,
}

/// Entry counts of one CSR matrix, row-major over `(row, pe)`.
struct RowCounts {
    pes: usize,
    counts: Vec<u32>,
    row_totals: Vec<u64>,
    offset_bits: u64,
}

impl RowCounts {
    /// Also returns per-PE array sizes and the total encoded size in bits.
    fn new(m: &CompactMatrix, pes: usize, widths: CsrWidths) -> Result<(Self, [u64; 3], u64)> {
        let csr = encode_csr(m, pes, widths)?;
        let rows = csr.rows;
        let mut counts = vec![0u32; rows * pes];
        for (p, part) in csr.partitions.iter().enumerate() {
            for r in 0..rows {
                counts[r * pes + p] = part.row_offsets[r + 1] - part.row_offsets[r];
            }
        }
        let row_totals = counts.chunks(pes).map(|c| c.iter().map(|&x| x as u64).sum()).collect();
        let vb = m.quant().bits as u64;
        let p = csr.partitions.iter().map(|p| p.entries()).max().unwrap_or(0) as u64;
        let ob = csr.partitions.first().map_or(0, |p| p.offset_bits as u64);
        let per_pe = [p * vb, p * widths.step_bits as u64, (rows as u64 + 1) * ob];
        let total = csr.entries() as u64 * (vb + widths.step_bits as u64) + csr.row_offset_bits();
        Ok((
            RowCounts {
                pes,
                counts,
                row_totals,
                offset_bits: ob,
            },
            per_pe,
            total,
        ))
    }
}

#[derive(Default)]
struct Tally {
    macs: u64,
    row_offset_reads: u64,
    row_offset_read_bits: u64,
    cycles: u64,
    act_reads: u64,
    act_writes: u64,
    dram_bytes: u64,
    vvadd_elems: u64,
    queue_ops: u64,
}

impl Tally {
    fn matvec(&mut self, rc: &RowCounts, act: &CompactVector<i16>, variant: CsrVariant, busy: &mut [u64], vb: u64) {
        busy.fill(0);
        let mut rows = 0u64;
        let mut visit = |r: usize| {
            rows += 1;
            self.macs += rc.row_totals[r];
            for (b, &c) in busy.iter_mut().zip(&rc.counts[r * rc.pes..(r + 1) * rc.pes]) {
                *b += (c as u64).max(1);
            }
        };
        match variant {
            CsrVariant::Eie => act.mask().iter_ones().for_each(&mut visit),
            CsrVariant::Ese => (0..act.dim()).for_each(&mut visit),
        }
        let pes = rc.pes as u64;
        self.row_offset_reads += 2 * rows * pes;
        self.row_offset_read_bits += 2 * rows * pes * rc.offset_bits;
        self.queue_ops += 2 * rows * pes;
        self.act_reads += (act.dim() as u64 * vb).div_ceil(ACT_WORD_BITS);
        self.cycles += FILL_CYCLES + busy.iter().copied().max().unwrap_or(0);
    }
}

/// Prices `net` running `u` on a `num_pes` CSR design. `trace` must be the
/// unpredicated golden trace of the same run; it supplies the activation
/// pattern of every product.
pub fn cost_csr_baseline(
    net: &RnnNetwork,
    u: &Utterance,
    trace: &NetworkTrace,
    num_pes: usize,
    variant: CsrVariant,
    onchip_act_timesteps: usize,
    c: &UnitCosts,
) -> Result<CsrBaseline> {
    if num_pes == 0 {
        return Err(Error::param("need at least one PE"));
    }
    if trace.layers.len() != net.layers.len() {
        return Err(Error::dim(format!(
            "trace has {} layers, network has {}",
            trace.layers.len(),
            net.layers.len()
        )));
    }
    let widths = CsrWidths::default();
    let mut t = Tally::default();
    let mut per_pe = [0u64; 3];
    let mut max_hidden = 0u64;
    let mut act_elems = 0u64;
    let mut vb_max = 0u64;
    let mut wb_max = 0u64;
    let mut busy = vec![0u64; num_pes];
    let mut inputs: &[CompactVector<i16>] = &u.inputs;

    for (layer, lt) in net.layers.iter().zip(&trace.layers) {
        let steps = inputs.len();
        let vb = layer.input_quant.bits.max(layer.hidden_quant.bits) as u64;
        vb_max = vb_max.max(vb);
        max_hidden = max_hidden.max(layer.hidden as u64);
        act_elems = act_elems.max((layer.input_dim + layer.hidden) as u64);
        let mut layer_bits = [0u64; 3];
        let zero = CompactVector::zeros(layer.hidden);
        for (di, d) in layer.directions().enumerate() {
            let states = if di == 0 {
                &lt.forward_hidden
            } else {
                lt.backward_hidden.as_ref().ok_or_else(|| Error::dim("trace lacks a backward pass"))?
            };
            if states.len() != steps {
                return Err(Error::dim("trace length differs from the utterance"));
            }
            wb_max = wb_max.max(d.wx.quant().bits.max(d.wh.quant().bits) as u64);
            let (wx, bx, sx) = RowCounts::new(&d.wx, num_pes, widths)?;
            let (wh, bh, sh) = RowCounts::new(&d.wh, num_pes, widths)?;
            t.dram_bytes += (sx + sh).div_ceil(8);
            for k in 0..3 {
                layer_bits[k] += bx[k] + bh[k];
            }
            for s in 0..steps {
                let (ti, prev) = if di == 0 {
                    (s, s.checked_sub(1))
                } else {
                    (steps - 1 - s, (s > 0).then(|| steps - s))
                };
                let h_prev = prev.map_or(&zero, |p| &states[p]);
                t.matvec(&wh, h_prev, variant, &mut busy, vb);
                t.matvec(&wx, &inputs[ti], variant, &mut busy, vb);
                let vv = (layer.hidden as u64).div_ceil(VVADD_WIDTH);
                t.cycles += vv;
                t.vvadd_elems += layer.hidden as u64;
                t.act_writes += (layer.hidden as u64 * vb).div_ceil(ACT_WORD_BITS);
            }
            for x in inputs.iter().skip(onchip_act_timesteps) {
                t.dram_bytes += (x.dim() as u64 * layer.input_quant.bits as u64).div_ceil(8);
            }
        }
        for k in 0..3 {
            per_pe[k] = per_pe[k].max(layer_bits[k]);
        }
        inputs = &lt.outputs;
    }

    let [value_bits, step_bits, offset_bits] = per_pe;
    let act_bits = act_elems * onchip_act_timesteps as u64 * vb_max;
    let reg_bits = num_pes as u64 * PE_REGISTER_BITS + max_hidden * ACCUMULATOR_BITS;
    let cycles = t.cycles as f64;
    let leak = |bits: u64| bits as f64 * cycles * c.leakage_per_bit_per_cycle;
    let p = num_pes as u64;
    let reg_static = reg_bits as f64 * cycles * c.register_bit_energy_per_cycle;

    let area = Breakdown {
        weight_sram: c.sram_arrays(num_pes, value_bits),
        mask_sram: c.sram_arrays(num_pes, step_bits),
        act_sram: c.sram_arrays(1, act_bits),
        row_offset_sram: c.sram_arrays(num_pes, offset_bits),
        registers: reg_bits as f64 * c.register_bit_area,
        logic: num_pes as f64 * c.lane_logic_area + VVADD_WIDTH as f64 * c.adder_area,
        dram: 0.0,
    };
    let energy = Breakdown {
        weight_sram: t.macs as f64 * c.sram_read(value_bits, wb_max) + leak(value_bits * p),
        // Steps sit beside their values and ride on the same access.
        mask_sram: (t.macs * widths.step_bits as u64) as f64 * c.sram_read_energy.eval(step_bits as f64)
            + leak(step_bits * p),
        act_sram: (t.act_reads + t.act_writes) as f64 * c.sram_read(act_bits, ACT_WORD_BITS) + leak(act_bits),
        row_offset_sram: t.row_offset_reads as f64 * c.sram_access_energy
            + t.row_offset_read_bits as f64 * c.sram_read_energy.eval(offset_bits as f64)
            + leak(offset_bits * p),
        registers: t.queue_ops as f64 * c.regfile_access_energy + reg_static,
        logic: t.macs as f64 * c.mac_energy + t.vvadd_elems as f64 * c.vvadd_energy,
        dram: t.dram_bytes as f64 * c.dram_energy_per_byte,
    };
    let static_energy = leak((value_bits + step_bits + offset_bits) * p) + leak(act_bits) + reg_static;
    Ok(CsrBaseline {
        cost: DesignCost {
            name: format!("{}x{num_pes}", variant.name()),
            cycles: t.cycles,
            area,
            energy,
            static_energy,
        },
        macs: t.macs,
        row_offset_reads: t.row_offset_reads,
        entry_reads: t.macs,
        act_reads: t.act_reads,
        act_writes: t.act_writes,
        dram_bytes: t.dram_bytes,
        value_bits_per_pe: value_bits,
        step_bits_per_pe: step_bits,
        offset_bits_per_pe: offset_bits,
        act_sram_bits: act_bits,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{forward_network, random_network};

    fn run(pes: usize, variant: CsrVariant) -> CsrBaseline {
        let (net, u) = random_network(11, 48, &[64], 0.3, 0.4, 6, true).unwrap();
        let tr = forward_network(&net, &u).unwrap();
        cost_csr_baseline(&net, &u, &tr, pes, variant, 333, &UnitCosts::default()).unwrap()
    }

    #[test]
    fn row_offset_area_scales_with_pes() {
        let (a, b) = (run(8, CsrVariant::Eie), run(64, CsrVariant::Eie));
        assert_eq!(b.offset_bits_per_pe * 64, 8 * 8 * a.offset_bits_per_pe);
        // Row-offset storage is small next to values at few PEs only.
        assert!(a.offset_bits_per_pe * 8 < a.value_bits_per_pe * 8);
    }

    #[test]
    fn ese_does_all_row_work_eie_skips_zero_rows() {
        let (net, u) = random_network(11, 48, &[64], 0.3, 0.4, 6, true).unwrap();
        let tr = forward_network(&net, &u).unwrap();
        let e = run(4, CsrVariant::Eie);
        let s = run(4, CsrVariant::Ese);
        let l = &net.layers[0];
        // ESE touches every row of both matrices in both directions.
        let rows = 2 * (l.input_dim + l.hidden) as u64 * u.timesteps() as u64;
        assert_eq!(s.row_offset_reads, 2 * 4 * rows);
        let nz_rows: u64 = u.inputs.iter().map(|x| x.nnz() as u64).sum::<u64>() * 2
            + tr.layers[0].forward_hidden.iter().take(u.timesteps() - 1).map(|h| h.nnz() as u64).sum::<u64>()
            + tr.layers[0].backward_hidden.as_ref().unwrap().iter().skip(1).map(|h| h.nnz() as u64).sum::<u64>();
        assert_eq!(e.row_offset_reads, 2 * 4 * nz_rows);
        assert!(e.macs < s.macs);
        assert!(e.cost.total_energy() < s.cost.total_energy());
    }

    #[test]
    fn energy_categories_sum() {
        let b = run(16, CsrVariant::Eie);
        let sum: f64 = b.cost.energy.values().iter().sum();
        assert_eq!(sum, b.cost.total_energy());
        assert!(b.cost.area.row_offset_sram > 0.0);
    }
}
