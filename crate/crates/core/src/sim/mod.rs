//! Cycle-level simulator of the lane array.

mod config;
mod engine;
mod partition;
mod run;
mod stats;

pub use config::{AcceleratorConfig, Capacities, Derived, LoadBalance, Predication};
pub use partition::{check_capacity, even_split, lane_footprints, max_lane_footprint, LaneAssignment, LaneFootprint};
pub use run::{compact_bytes, direction_bytes, simulate_network, simulate_network_with, PassTiming, SimOptions, SimResult, Simulator};
pub use stats::{cycle_breakdown, CycleBreakdown, LaneCycles, LoadCycles, SimStats, SramReads};
