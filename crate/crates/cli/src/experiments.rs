//! Scaling experiment and the long-format tables behind each figure.

use std::collections::HashMap;

use masr_core::cost::{compare, cost_csr_baseline, cost_masr, masr_footprint, CsrVariant, DesignCost, UnitCosts};
use masr_core::model::{forward_network, generate_synthetic, random_sparse_matrix, SyntheticSpec};
use masr_core::sim::{simulate_network, simulate_network_with, AcceleratorConfig, LoadBalance, SimOptions, SimStats};
use masr_core::sparse::{metadata_footprint, CsrWidths, Encoding};
use masr_core::{Error, Result};
use serde::{Deserialize, Serialize};

use crate::workload::Workload;

/// Lane counts of the Pareto-front designs.
pub const DESIGN_LANES: [usize; 6] = [32, 64, 128, 256, 512, 1024];

fn design(lanes: usize) -> AcceleratorConfig {
    AcceleratorConfig::lanes(lanes).expect("design lane count")
}

/// Simulation results keyed by config id, so figures that share a design
/// point simulate it once.
#[derive(Default)]
pub struct RunCache {
    runs: HashMap<String, SimStats>,
}

impl RunCache {
    pub fn stats(&mut self, cfg: &AcceleratorConfig, w: &Workload) -> Result<&SimStats> {
        let id = cfg.id();
        if !self.runs.contains_key(&id) {
            let r = simulate_network(&w.net, &w.utterance, cfg)?;
            self.runs.insert(id.clone(), r.stats);
        }
        Ok(&self.runs[&id])
    }

    pub fn cost(&mut self, cfg: &AcceleratorConfig, w: &Workload, costs: &UnitCosts) -> Result<DesignCost> {
        let f = masr_footprint(&w.net, cfg, w.act_density())?;
        let s = self.stats(cfg, w)?;
        Ok(cost_masr(s, cfg, &f, costs))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScaleSpec {
    pub hidden: Vec<usize>,
    pub nz: Vec<f64>,
    pub timesteps: usize,
    pub seed: u64,
    pub config: AcceleratorConfig,
}

impl Default for ScaleSpec {
    fn default() -> Self {
        ScaleSpec {
            hidden: vec![1024, 3072],
            nz: vec![0.10, 0.25, 0.50],
            timesteps: 4,
            seed: 1,
            config: AcceleratorConfig {
                act_banks: 8,
                load_balance: LoadBalance::Vertical,
                ..design(256)
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScaleRow {
    pub hidden: usize,
    pub nz: f64,
    pub weight_density: f64,
    pub act_density: f64,
    pub sparse_cycles: u64,
    pub dense_cycles: u64,
    pub speedup: f64,
}

/// Cycles spent computing, off-chip stalls excluded.
fn compute_cycles(s: &SimStats) -> u64 {
    s.total_cycles - s.weight_load.exposed - s.act_load.exposed
}

/// One bidirectional layer whose weights, inputs and hidden states all sit
/// at density `nz`, run sparse and with every element treated as nonzero.
pub fn scale_point(hidden: usize, nz: f64, timesteps: usize, seed: u64, cfg: &AcceleratorConfig) -> Result<ScaleRow> {
    let spec = SyntheticSpec {
        hidden,
        layers: 1,
        weight_nz: nz,
        act_nz: nz,
        input_nz: Some(nz),
        ..SyntheticSpec::standard(timesteps, seed)
    };
    let (net, u) = generate_synthetic(&spec)?;
    let trace = forward_network(&net, &u)?;
    let sparse = simulate_network(&net, &u, cfg)?;
    let dense = simulate_network_with(&net, &u, cfg, SimOptions { dense: true })?;
    let (s, d) = (compute_cycles(&sparse.stats), compute_cycles(&dense.stats));
    Ok(ScaleRow {
        hidden,
        nz,
        weight_density: net.weight_density(),
        act_density: trace.stats[0].hidden_density,
        sparse_cycles: s,
        dense_cycles: d,
        speedup: d as f64 / s as f64,
    })
}

pub fn scale_experiment(spec: &ScaleSpec) -> Result<Vec<ScaleRow>> {
    let mut out = Vec::new();
    for &h in &spec.hidden {
        for &nz in &spec.nz {
            out.push(scale_point(h, nz, spec.timesteps, spec.seed, &spec.config)?);
        }
    }
    Ok(out)
}

/// Area or energy of one resource category of one design.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResourceRow {
    pub design: String,
    pub lanes: usize,
    pub metric: String,
    pub category: String,
    pub value: f64,
}

pub fn resources(w: &Workload, cache: &mut RunCache, costs: &UnitCosts) -> Result<Vec<ResourceRow>> {
    let mut out = Vec::new();
    for lanes in DESIGN_LANES {
        let d = cache.cost(&design(lanes), w, costs)?;
        for (metric, b) in [("area", &d.area), ("energy", &d.energy)] {
            for (c, v) in b.entries() {
                out.push(ResourceRow {
                    design: d.name.clone(),
                    lanes,
                    metric: metric.into(),
                    category: c.into(),
                    value: v,
                });
            }
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BankRow {
    pub banks: usize,
    pub category: String,
    pub fraction: f64,
}

/// Cycle breakdown of LANESx1024 as the activation SRAM gains banks.
pub fn banking(w: &Workload, cache: &mut RunCache) -> Result<Vec<BankRow>> {
    let mut out = Vec::new();
    for banks in [1, 2, 4, 8] {
        let cfg = AcceleratorConfig { act_banks: banks, ..design(1024) };
        let b = cache.stats(&cfg, w)?.breakdown();
        out.extend(b.entries().map(|(c, f)| BankRow { banks, category: c.into(), fraction: f }));
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QueueRow {
    pub queue_depth: usize,
    pub category: String,
    pub fraction: f64,
}

/// Cycle breakdown of LANESx1024 with 8 banks as the queues deepen.
pub fn queue_depths(w: &Workload, cache: &mut RunCache) -> Result<Vec<QueueRow>> {
    let mut out = Vec::new();
    for q in [1, 2, 4, 8] {
        let cfg = AcceleratorConfig { queue_depth: q, act_banks: 8, ..design(1024) };
        let b = cache.stats(&cfg, w)?.breakdown();
        out.extend(b.entries().map(|(c, f)| QueueRow { queue_depth: q, category: c.into(), fraction: f }));
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UtilRow {
    pub lanes: usize,
    pub design: String,
    pub utilization: f64,
}

/// The three optimization levels compared in the utilization figure.
pub fn optimization_levels(lanes: usize) -> [(&'static str, AcceleratorConfig); 3] {
    let base = design(lanes);
    let vv = AcceleratorConfig { act_banks: 8, ..base.clone() };
    let vlb = AcceleratorConfig { load_balance: LoadBalance::Vertical, ..vv.clone() };
    [("base", base), ("vv", vv), ("vv+vlb", vlb)]
}

pub fn utilization(w: &Workload, cache: &mut RunCache) -> Result<Vec<UtilRow>> {
    let mut out = Vec::new();
    for lanes in DESIGN_LANES {
        for (name, cfg) in optimization_levels(lanes) {
            out.push(UtilRow {
                lanes,
                design: name.into(),
                utilization: cache.stats(&cfg, w)?.utilization(),
            });
        }
    }
    Ok(out)
}

/// Total area or energy of one design; `normalized` is against MASR
/// LANESx32 for area and MASR LANESx256 for energy.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BaselineRow {
    pub lanes: usize,
    pub design: String,
    pub metric: String,
    pub value: f64,
    pub normalized: f64,
}

pub fn baselines(w: &Workload, cache: &mut RunCache, costs: &UnitCosts) -> Result<Vec<BaselineRow>> {
    let mut designs = Vec::new();
    for lanes in DESIGN_LANES {
        designs.push((lanes, "MASR", cache.cost(&design(lanes), w, costs)?));
        for v in [CsrVariant::Eie, CsrVariant::Ese] {
            let cfg = design(lanes);
            let b = cost_csr_baseline(&w.net, &w.utterance, &w.trace, lanes, v, cfg.onchip_act_timesteps, costs)?;
            designs.push((lanes, v.name(), b.cost));
        }
    }
    let all: Vec<DesignCost> = designs.iter().map(|d| d.2.clone()).collect();
    let by_area = compare(&all, 0)?;
    let e_ref = designs
        .iter()
        .position(|(l, n, _)| *l == 256 && *n == "MASR")
        .ok_or_else(|| Error::Parameter("no LANESx256 design".into()))?;
    let by_energy = compare(&all, e_ref)?;
    let mut out = Vec::new();
    for (i, (lanes, name, d)) in designs.iter().enumerate() {
        out.push(BaselineRow {
            lanes: *lanes,
            design: name.to_string(),
            metric: "area".into(),
            value: d.total_area(),
            normalized: by_area[i].area.total,
        });
        out.push(BaselineRow {
            lanes: *lanes,
            design: name.to_string(),
            metric: "energy".into(),
            value: d.total_energy(),
            normalized: by_energy[i].energy.total,
        });
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EncodingRow {
    pub partitions: usize,
    pub encoding: String,
    pub value_bits: u64,
    pub mask_bits: u64,
    pub row_offset_bits: u64,
    pub column_index_bits: u64,
    pub metadata_bits: u64,
    pub total_bits: u64,
}

/// Footprint of one random matrix under every encoding at each partition
/// count.
pub fn encodings(rows: usize, cols: usize, nz: f64, bits: u32, seed: u64, partitions: &[usize]) -> Result<Vec<EncodingRow>> {
    let m = random_sparse_matrix(seed, rows, cols, nz, bits)?;
    let mut out = Vec::new();
    for &p in partitions {
        for e in Encoding::ALL {
            let f = metadata_footprint(e, &m, p, CsrWidths::default())?;
            out.push(EncodingRow {
                partitions: p,
                encoding: e.name().into(),
                value_bits: f.value_bits,
                mask_bits: f.mask_bits,
                row_offset_bits: f.row_offset_bits,
                column_index_bits: f.column_index_bits,
                metadata_bits: f.metadata_bits(),
                total_bits: f.total_bits,
            });
        }
    }
    Ok(out)
}
