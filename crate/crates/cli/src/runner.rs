use masr_core::cost::{cost_masr, masr_footprint, DesignCost, UnitCosts};
use masr_core::model::{forward_network_predicated, NetworkTrace};
use masr_core::sim::{simulate_network, AcceleratorConfig, CycleBreakdown, LoadBalance, Predication, SimResult};
use masr_core::sparse::CompactVector;
use masr_core::{Error, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::workload::Workload;
use crate::SCHEMA_VERSION;

/// Flat per-run record shared by `run` and `sweep` outputs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRow {
    pub config_id: String,
    pub seed: u64,
    pub horiz_lanes: usize,
    pub vert_lanes: usize,
    pub horiz_pes: usize,
    pub lanes: usize,
    pub queue_depth: usize,
    pub act_banks: usize,
    pub load_balance: LoadBalance,
    /// Empty when the run succeeded.
    pub error: String,
    pub total_cycles: u64,
    pub utilization: f64,
    pub frac_mac: f64,
    pub frac_frontend: f64,
    pub frac_stall: f64,
    pub frac_idle: f64,
    pub frac_vvadd: f64,
    pub frac_load: f64,
    pub mac_count: u64,
    pub stolen_macs: u64,
    pub skipped_columns: u64,
    pub dram_bytes: u64,
    pub weight_exposed_cycles: u64,
    pub act_exposed_cycles: u64,
    pub area: f64,
    pub energy: f64,
    pub power: f64,
    pub golden_match: bool,
    pub output_checksum: String,
}

impl RunRow {
    pub fn ok(&self) -> bool {
        self.error.is_empty()
    }

    fn base(cfg: &AcceleratorConfig, seed: u64) -> Self {
        RunRow {
            config_id: cfg.id(),
            seed,
            horiz_lanes: cfg.horiz_lanes,
            vert_lanes: cfg.vert_lanes,
            horiz_pes: cfg.horiz_pes,
            lanes: cfg.total_lanes(),
            queue_depth: cfg.queue_depth,
            act_banks: cfg.act_banks,
            load_balance: cfg.load_balance,
            error: String::new(),
            total_cycles: 0,
            utilization: 0.0,
            frac_mac: 0.0,
            frac_frontend: 0.0,
            frac_stall: 0.0,
            frac_idle: 0.0,
            frac_vvadd: 0.0,
            frac_load: 0.0,
            mac_count: 0,
            stolen_macs: 0,
            skipped_columns: 0,
            dram_bytes: 0,
            weight_exposed_cycles: 0,
            act_exposed_cycles: 0,
            area: 0.0,
            energy: 0.0,
            power: 0.0,
            golden_match: false,
            output_checksum: String::new(),
        }
    }

    pub fn failed(cfg: &AcceleratorConfig, seed: u64, e: &Error) -> Self {
        RunRow {
            error: e.to_string(),
            ..Self::base(cfg, seed)
        }
    }

    fn from_run(cfg: &AcceleratorConfig, seed: u64, r: &RunReport) -> Self {
        let s = &r.sim.stats;
        let b = &r.breakdown;
        RunRow {
            total_cycles: s.total_cycles,
            utilization: s.utilization(),
            frac_mac: b.mac,
            frac_frontend: b.frontend,
            frac_stall: b.stall,
            frac_idle: b.idle,
            frac_vvadd: b.vvadd,
            frac_load: b.load,
            mac_count: s.mac_count,
            stolen_macs: s.stolen_macs,
            skipped_columns: s.skipped_columns,
            dram_bytes: s.dram_bytes,
            weight_exposed_cycles: s.weight_load.exposed,
            act_exposed_cycles: s.act_load.exposed,
            area: r.cost.total_area(),
            energy: r.cost.total_energy(),
            power: r.cost.total_power(),
            golden_match: r.golden_match,
            output_checksum: r.output_checksum.clone(),
            ..Self::base(cfg, seed)
        }
    }
}

/// Everything one simulation produced.
pub struct RunReport {
    pub config: AcceleratorConfig,
    pub seed: u64,
    pub workload: String,
    pub sim: SimResult,
    pub breakdown: CycleBreakdown,
    pub cost: DesignCost,
    pub output_checksum: String,
    pub golden_match: bool,
}

/// Serialized form of a [`RunReport`]; per-lane counters are left out.
#[derive(Serialize)]
struct RunDoc<'a> {
    schema_version: u32,
    workload: &'a str,
    seed: u64,
    config: &'a AcceleratorConfig,
    summary: &'a RunRow,
    breakdown: &'a CycleBreakdown,
    cost: &'a DesignCost,
    passes: &'a [masr_core::sim::PassTiming],
}

impl RunReport {
    pub fn row(&self) -> RunRow {
        RunRow::from_run(&self.config, self.seed, self)
    }

    /// Pretty JSON, byte-identical for identical inputs.
    pub fn to_json(&self) -> String {
        let row = self.row();
        let doc = RunDoc {
            schema_version: SCHEMA_VERSION,
            workload: &self.workload,
            seed: self.seed,
            config: &self.config,
            summary: &row,
            breakdown: &self.breakdown,
            cost: &self.cost,
            passes: &self.sim.passes,
        };
        serde_json::to_string_pretty(&doc).expect("report serializes") + "\n"
    }
}

/// SHA-256 over every layer's outputs: per vector its dimension as u32
/// then every code as i16, little-endian.
pub fn output_checksum(layers: &[Vec<CompactVector<i16>>]) -> String {
    let mut h = Sha256::new();
    for v in layers.iter().flatten() {
        h.update((v.dim() as u32).to_le_bytes());
        for c in v.decode() {
            h.update(c.to_le_bytes());
        }
    }
    hex::encode(h.finalize())
}

fn golden_outputs(w: &Workload, cfg: &AcceleratorConfig) -> Result<Option<NetworkTrace>> {
    match cfg.predication {
        Predication::Off => Ok(None),
        Predication::Threshold(t) => Ok(Some(forward_network_predicated(&w.net, &w.utterance, t)?.0)),
    }
}

/// Simulates `w` on `cfg`, checks the outputs against the golden model and
/// prices the run.
pub fn run_config(cfg: &AcceleratorConfig, w: &Workload, seed: u64, costs: &UnitCosts) -> Result<RunReport> {
    let sim = simulate_network(&w.net, &w.utterance, cfg)?;
    let predicated = golden_outputs(w, cfg)?;
    let golden = predicated.as_ref().unwrap_or(&w.trace);
    let golden_match = golden.layers.len() == sim.layer_outputs.len()
        && golden.layers.iter().zip(&sim.layer_outputs).all(|(g, s)| &g.outputs == s);
    let footprint = masr_footprint(&w.net, cfg, w.act_density())?;
    let cost = cost_masr(&sim.stats, cfg, &footprint, costs);
    Ok(RunReport {
        config: cfg.clone(),
        seed,
        workload: w.name().to_string(),
        breakdown: sim.stats.breakdown(),
        output_checksum: output_checksum(&sim.layer_outputs),
        golden_match,
        cost,
        sim,
    })
}

/// Like [`run_config`] but never fails: errors become a row.
pub fn run_row(cfg: &AcceleratorConfig, w: &Workload, seed: u64, costs: &UnitCosts) -> RunRow {
    match run_config(cfg, w, seed, costs) {
        Ok(r) => r.row(),
        Err(e) => RunRow::failed(cfg, seed, &e),
    }
}
