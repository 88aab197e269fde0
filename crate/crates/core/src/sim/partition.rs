use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::config::AcceleratorConfig;
use crate::error::{Error, Result};
use crate::model::{RnnLayer, RnnNetwork};
use crate::sparse::CompactMatrix;

/// Splits `n` items into `parts` contiguous ranges; the first `n % parts`
/// ranges get one extra item.
pub fn even_split(n: usize, parts: usize) -> Vec<Range<usize>> {
    let (base, extra) = (n / parts, n % parts);
    let mut start = 0;
    (0..parts)
        .map(|i| {
            let len = base + usize::from(i < extra);
            let r = start..start + len;
            start += len;
            r
        })
        .collect()
}

/// Tiling of one `rows x cols` matrix over the lane grid. Lane `(h, v)` owns
/// rows `rows[v]` and columns `cols[h]`; its last `tail[v]` rows are
/// duplicated into the lanes allowed to steal from it.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LaneAssignment {
    pub rows: Vec<Range<usize>>,
    pub cols: Vec<Range<usize>>,
    pub tail: Vec<usize>,
}

impl LaneAssignment {
    pub fn new(rows: usize, cols: usize, cfg: &AcceleratorConfig) -> Self {
        let rows = even_split(rows, cfg.vert_lanes);
        let tail = rows
            .iter()
            .map(|r| if cfg.load_balance == super::LoadBalance::None { 0 } else { (cfg.dup_fraction * r.len() as f64).floor() as usize })
            .collect();
        LaneAssignment {
            rows,
            cols: even_split(cols, cfg.horiz_lanes),
            tail,
        }
    }

    /// First duplicated row of vertical slice `v`.
    pub fn tail_start(&self, v: usize) -> usize {
        self.rows[v].end - self.tail[v]
    }

    /// Lane owning input row `r`'s vertical slice, by row.
    pub fn slice_of_rows(&self) -> Vec<u16> {
        let mut out = Vec::with_capacity(self.rows.last().map_or(0, |r| r.end));
        for (v, r) in self.rows.iter().enumerate() {
            out.extend(std::iter::repeat(v as u16).take(r.len()));
        }
        out
    }

    pub fn slice_of_cols(&self) -> Vec<u16> {
        let mut out = Vec::with_capacity(self.cols.last().map_or(0, |r| r.end));
        for (h, c) in self.cols.iter().enumerate() {
            out.extend(std::iter::repeat(h as u16).take(c.len()));
        }
        out
    }
}

/// Compact storage one lane needs for a set of matrices.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LaneFootprint {
    pub value_bits: u64,
    pub mask_bits: u64,
    pub dup_value_bits: u64,
    pub dup_mask_bits: u64,
}

impl LaneFootprint {
    pub fn weight_bytes(&self) -> u64 {
        (self.value_bits + self.dup_value_bits).div_ceil(8)
    }

    pub fn mask_bytes(&self) -> u64 {
        (self.mask_bits + self.dup_mask_bits).div_ceil(8)
    }
}

/// Per-lane storage for the given matrices (one layer's worth), including
/// the duplicated tails a lane keeps for the neighbors it may help.
pub fn lane_footprints(mats: &[&CompactMatrix], cfg: &AcceleratorConfig) -> Vec<LaneFootprint> {
    let (h, v) = (cfg.horiz_lanes, cfg.vert_lanes);
    let mut out = vec![LaneFootprint::default(); h * v];
    for m in mats {
        let a = LaneAssignment::new(m.rows(), m.cols(), cfg);
        let bits = m.quant().bits as u64;
        for hi in 0..h {
            for vi in 0..v {
                let lane = &mut out[hi * v + vi];
                let (rows, cols) = (a.rows[vi].clone(), a.cols[hi].clone());
                lane.value_bits += m.nnz_in(rows.clone(), cols.clone()) as u64 * bits;
                lane.mask_bits += (rows.len() * cols.len()) as u64;
                // Tails this lane holds: its vertical and horizontal victims'.
                let mut victims = Vec::new();
                if cfg.load_balance.vertical() && v > 1 {
                    victims.push((hi, (vi + 1) % v));
                }
                if cfg.load_balance.horizontal() {
                    let per_pe = h / cfg.horiz_pes;
                    if per_pe > 1 {
                        let base = hi / per_pe * per_pe;
                        victims.push((base + (hi - base + 1) % per_pe, vi));
                    }
                }
                for (vh, vv) in victims {
                    let t = a.tail_start(vv)..a.rows[vv].end;
                    let c = a.cols[vh].clone();
                    lane.dup_value_bits += m.nnz_in(t.clone(), c.clone()) as u64 * bits;
                    lane.dup_mask_bits += (t.len() * c.len()) as u64;
                }
            }
        }
    }
    out
}

fn layer_mats(l: &RnnLayer) -> Vec<&CompactMatrix> {
    l.directions().flat_map(|d| [&d.wx, &d.wh]).collect()
}

/// Largest per-lane footprint over all layers, each layer holding both of
/// its directions on chip.
pub fn max_lane_footprint(net: &RnnNetwork, cfg: &AcceleratorConfig) -> LaneFootprint {
    let mut best = LaneFootprint::default();
    for l in &net.layers {
        for f in lane_footprints(&layer_mats(l), cfg) {
            if f.weight_bytes() > best.weight_bytes() {
                best.value_bits = f.value_bits;
                best.dup_value_bits = f.dup_value_bits;
            }
            if f.mask_bytes() > best.mask_bytes() {
                best.mask_bits = f.mask_bits;
                best.dup_mask_bits = f.dup_mask_bits;
            }
        }
    }
    best
}

/// Checks that every layer fits the configured per-lane SRAMs.
pub fn check_capacity(net: &RnnNetwork, cfg: &AcceleratorConfig) -> Result<LaneFootprint> {
    let f = max_lane_footprint(net, cfg);
    let caps = &cfg.capacities;
    if let Some(cap) = caps.weight_bytes_per_lane {
        if f.weight_bytes() > cap {
            return Err(Error::Capacity(format!(
                "a lane needs {} weight bytes, capacity is {cap}",
                f.weight_bytes()
            )));
        }
    }
    if let Some(cap) = caps.mask_bytes_per_lane {
        if f.mask_bytes() > cap {
            return Err(Error::Capacity(format!(
                "a lane needs {} mask bytes, capacity is {cap}",
                f.mask_bytes()
            )));
        }
    }
    Ok(f)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn split_sizes() {
        assert_eq!(even_split(800, 32)[0], 0..25);
        assert_eq!(even_split(10, 4), vec![0..3, 3..6, 6..8, 8..10]);
        assert_eq!(even_split(2, 4), vec![0..1, 1..2, 2..2, 2..2]);
    }

    #[test]
    fn tiles_cover_matrix_once() {
        let cfg = AcceleratorConfig::topology(8, 4, 2);
        let a = LaneAssignment::new(37, 29, &cfg);
        let mut seen = vec![0u8; 37 * 29];
        for r in &a.rows {
            for c in &a.cols {
                for i in r.clone() {
                    for j in c.clone() {
                        seen[i * 29 + j] += 1;
                    }
                }
            }
        }
        assert!(seen.iter().all(|s| *s == 1));
    }

    #[test]
    fn tails_respect_fraction() {
        let mut cfg = AcceleratorConfig::topology(1, 4, 1);
        cfg.load_balance = super::super::LoadBalance::Vertical;
        let a = LaneAssignment::new(100, 4, &cfg);
        assert_eq!(a.tail, vec![2, 2, 2, 2]);
        assert_eq!(a.tail_start(1), 48);
    }
}
