use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Where one lane spent its cycles. Cycles in which the whole array waits
/// (VVAdd, exposed DRAM transfers) count as idle.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LaneCycles {
    pub mac_busy: u64,
    pub idle: u64,
    pub stall: u64,
    pub frontend: u64,
}

impl LaneCycles {
    pub fn total(&self) -> u64 {
        self.mac_busy + self.idle + self.stall + self.frontend
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SramReads {
    pub weight: u64,
    pub weight_mask: u64,
    pub act: u64,
    pub act_mask: u64,
}

/// Off-chip transfer time and the part of it compute could not hide.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoadCycles {
    pub transfer: u64,
    pub exposed: u64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SimStats {
    pub total_cycles: u64,
    pub lanes: Vec<LaneCycles>,
    /// Cycles inside matrix-vector phases, pipeline fill included.
    pub matvec_cycles: u64,
    pub fill_cycles: u64,
    pub vvadd_cycles: u64,
    pub weight_load: LoadCycles,
    pub act_load: LoadCycles,
    pub mac_count: u64,
    /// MACs executed by a lane other than the tile owner.
    pub stolen_macs: u64,
    /// Input-phase columns skipped by predication.
    pub skipped_columns: u64,
    pub sram_reads: SramReads,
    pub act_sram_writes: u64,
    pub regfile_reads: u64,
    pub regfile_writes: u64,
    pub queue_pushes: u64,
    pub queue_pops: u64,
    pub dram_bytes: u64,
    pub timesteps: u64,
    pub phases: u64,
    /// Whether every streamed activation vector arrived faster than one
    /// timestep of compute.
    pub act_stream_hidden: bool,
}

impl SimStats {
    pub fn new(lanes: usize) -> Self {
        SimStats {
            lanes: vec![LaneCycles::default(); lanes],
            act_stream_hidden: true,
            ..Default::default()
        }
    }

    pub fn total_lanes(&self) -> usize {
        self.lanes.len()
    }

    pub fn utilization(&self) -> f64 {
        if self.total_cycles == 0 || self.lanes.is_empty() {
            0.0
        } else {
            self.mac_count as f64 / (self.lanes.len() as f64 * self.total_cycles as f64)
        }
    }

    /// Adds cycles during which every lane waits.
    pub(crate) fn add_global_idle(&mut self, cycles: u64) {
        self.total_cycles += cycles;
        for l in &mut self.lanes {
            l.idle += cycles;
        }
    }

    /// Every lane's categories must sum to the run length.
    pub fn check_accounting(&self) -> Result<()> {
        for (i, l) in self.lanes.iter().enumerate() {
            if l.total() != self.total_cycles {
                return Err(Error::Integrity(format!(
                    "lane {i} accounts for {} of {} cycles",
                    l.total(),
                    self.total_cycles
                )));
            }
        }
        Ok(())
    }

    pub fn breakdown(&self) -> CycleBreakdown {
        cycle_breakdown(self)
    }
}

/// Lane-averaged cycle fractions; the six categories sum to one.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CycleBreakdown {
    pub mac: f64,
    pub frontend: f64,
    pub stall: f64,
    pub idle: f64,
    pub vvadd: f64,
    pub load: f64,
}

impl CycleBreakdown {
    pub fn sum(&self) -> f64 {
        self.mac + self.frontend + self.stall + self.idle + self.vvadd + self.load
    }

    pub fn entries(&self) -> [(&'static str, f64); 6] {
        [
            ("mac", self.mac),
            ("frontend", self.frontend),
            ("stall", self.stall),
            ("idle", self.idle),
            ("vvadd", self.vvadd),
            ("load", self.load),
        ]
    }
}

pub fn cycle_breakdown(s: &SimStats) -> CycleBreakdown {
    if s.total_cycles == 0 || s.lanes.is_empty() {
        return CycleBreakdown::default();
    }
    let n = s.lanes.len() as f64;
    let t = s.total_cycles as f64;
    let sum = |f: fn(&LaneCycles) -> u64| s.lanes.iter().map(f).sum::<u64>() as f64 / n / t;
    let global_idle = (s.vvadd_cycles + s.weight_load.exposed + s.act_load.exposed) as f64 / t;
    CycleBreakdown {
        mac: sum(|l| l.mac_busy),
        frontend: sum(|l| l.frontend),
        stall: sum(|l| l.stall),
        idle: sum(|l| l.idle) - global_idle,
        vvadd: s.vvadd_cycles as f64 / t,
        load: (s.weight_load.exposed + s.act_load.exposed) as f64 / t,
    }
}
