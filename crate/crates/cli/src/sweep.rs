use masr_core::cost::UnitCosts;
use masr_core::sim::{AcceleratorConfig, LoadBalance};
use masr_core::{Error, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::pareto::{pareto_points, ParetoPoint};
use crate::runner::{run_row, RunRow};
use crate::workload::WorkloadSpec;

/// Cartesian product of topologies and microarchitectural knobs over one
/// workload and a list of seeds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSpec {
    /// `(horiz, vert, pes)` triples; every valid topology when absent.
    pub topologies: Option<Vec<(usize, usize, usize)>>,
    /// Keep only topologies with these total lane counts.
    pub lanes: Option<Vec<usize>>,
    pub queue_depths: Vec<usize>,
    pub act_banks: Vec<usize>,
    pub load_balance: Vec<LoadBalance>,
    pub seeds: Vec<u64>,
    /// Every other config field.
    pub base: AcceleratorConfig,
    pub workload: WorkloadSpec,
}

impl Default for SweepSpec {
    fn default() -> Self {
        SweepSpec {
            topologies: None,
            lanes: None,
            queue_depths: vec![1],
            act_banks: vec![1],
            load_balance: vec![LoadBalance::None],
            seeds: vec![1],
            base: AcceleratorConfig::default(),
            workload: WorkloadSpec::default(),
        }
    }
}

/// Every `(h, v, p)` with `h` and `v` powers of two up to 32 and `p | h`.
pub fn all_topologies() -> Vec<(usize, usize, usize)> {
    let dims: Vec<usize> = (0..=5).map(|i| 1 << i).collect();
    let mut out = Vec::new();
    for &h in &dims {
        for &v in &dims {
            for &p in dims.iter().filter(|p| h % **p == 0) {
                out.push((h, v, p));
            }
        }
    }
    out
}

impl SweepSpec {
    pub fn from_toml_str(src: &str) -> Result<Self> {
        toml::from_str(src).map_err(|e| Error::toml(src, &e))
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let path = path.as_ref();
        let src = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&src)
    }

    /// Every config of the product, validated, in canonical id order.
    pub fn configs(&self) -> Result<Vec<AcceleratorConfig>> {
        let topos = self.topologies.clone().unwrap_or_else(all_topologies);
        let mut out = Vec::new();
        for &(h, v, p) in &topos {
            if self.lanes.as_ref().is_some_and(|l| !l.contains(&(h * v))) {
                continue;
            }
            for &q in &self.queue_depths {
                for &b in &self.act_banks {
                    for &lb in &self.load_balance {
                        let cfg = AcceleratorConfig {
                            horiz_lanes: h,
                            vert_lanes: v,
                            horiz_pes: p,
                            queue_depth: q,
                            act_banks: b,
                            load_balance: lb,
                            ..self.base.clone()
                        };
                        cfg.validate()?;
                        out.push(cfg);
                    }
                }
            }
        }
        if out.is_empty() || self.seeds.is_empty() {
            return Err(Error::Config(vec!["sweep has no configurations".into()]));
        }
        out.sort_by_key(|c| c.id());
        out.dedup_by_key(|c| c.id());
        Ok(out)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub rows: Vec<RunRow>,
    pub pareto: Vec<ParetoPoint>,
}

/// Runs every config for every seed, in parallel. A failing config becomes
/// a row with its error; only workload generation aborts the sweep.
pub fn run_sweep(spec: &SweepSpec, costs: &UnitCosts) -> Result<SweepResult> {
    let configs = spec.configs()?;
    let mut rows = Vec::new();
    for &seed in &spec.seeds {
        let w = WorkloadSpec {
            seed,
            ..spec.workload.clone()
        }
        .load()?;
        let batch: Vec<RunRow> = configs.par_iter().map(|c| run_row(c, &w, seed, costs)).collect();
        rows.extend(batch);
    }
    rows.sort_by(|a, b| a.config_id.cmp(&b.config_id).then(a.seed.cmp(&b.seed)));
    let pareto = pareto_points(&rows);
    Ok(SweepResult { rows, pareto })
}
